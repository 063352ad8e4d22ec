"""Fit distortion curves and path regularity to their predicted forms.

Two rate models are compared:

* ``polylog``: ``e_N ~ C (log N)**-b``
* ``subexp``:  ``e_N ~ C exp(-c sqrt(log N log log N))``

and the mean regularity exponent ``b`` of ``(E|X_{t+h} - X_t|**rho)**(1/rho) ~ h**b``
is estimated from simulated paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import cppq, fquant
from .errors import DomainError, InsufficientPointsError
from .haar import TimeGrid
from .procsim import Poisson, ProcessSpec, iter_path_blocks
from .rng import as_factory

MIN_POINTS = 4
N_BASE_POINTS = 32
AGREEMENT_TOL = 0.15
REPORT_HEADER = "family,rho,r,p,b_regularity,b_rate,c_subexp,R2_polylog,R2_subexp,agreement"


@dataclass(frozen=True)
class RateFit:
    model: str
    param: float
    C: float
    r2: float
    residuals: np.ndarray
    N_range: tuple[int, int]

    def predict(self, N) -> np.ndarray:
        x = _regressor(self.model, np.asarray(N, dtype=float))
        return self.C * np.exp(-self.param * x)


def _regressor(model: str, N: np.ndarray) -> np.ndarray:
    L = np.log(N)
    if model == "polylog":
        return np.log(L)
    if model == "subexp":
        return np.sqrt(L * np.log(L))
    raise ValueError(f"unknown rate model {model!r}")


def _ols(x: np.ndarray, y: np.ndarray):
    """Slope, intercept, R^2, residuals and slope standard error."""
    X = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1 - ss_res / ss_tot))
    n = x.size
    sxx = float(np.sum((x - x.mean()) ** 2))
    se = math.sqrt(ss_res / (n - 2) / sxx) if n > 2 and sxx > 0 else 0.0
    return float(coef[0]), float(coef[1]), r2, resid, se


def _curve_arrays(curve):
    if len(curve) and isinstance(curve[0], fquant.DistortionReport):
        curve = [(c.N, c.estimate) for c in curve]
    a = np.asarray(curve, dtype=float)
    if a.ndim != 2 or a.shape[1] < 2:
        raise ValueError("curve must be a sequence of (N, e_N) pairs")
    if a.shape[0] < MIN_POINTS:
        raise InsufficientPointsError(f"rate fit needs >= {MIN_POINTS} points, got {a.shape[0]}")
    return a[:, 0], a[:, 1]


def _fit(curve, model: str, N_min: float) -> RateFit:
    N, e = _curve_arrays(curve)
    if np.any(N < N_min):
        raise DomainError(f"{model} fit needs all N >= {N_min:g}")
    if np.any(e <= 0):
        raise DomainError("distortions must be positive")
    slope, icpt, r2, resid, _ = _ols(_regressor(model, N), np.log(e))
    return RateFit(model, -slope, math.exp(icpt), r2, resid, (int(N.min()), int(N.max())))


def fit_polylog(curve) -> RateFit:
    """Least squares of ``log e`` on ``log log N``; ``param`` is ``b``."""
    return _fit(curve, "polylog", 3)


def fit_subexp(curve) -> RateFit:
    """Least squares of ``log e`` on ``sqrt(log N log log N)``; ``param`` is ``c``."""
    return _fit(curve, "subexp", 16)


# -- mean pathwise regularity -------------------------------------------------


@dataclass(frozen=True)
class RegularityEstimate:
    b: float
    h: np.ndarray
    phi: np.ndarray
    rho: float
    half_width: float

    def __post_init__(self):
        if len(self.h) < MIN_POINTS:
            raise InsufficientPointsError(f"h ladder needs >= {MIN_POINTS} rungs")


def default_ladder(T: float = 1.0, finest: int = 10) -> np.ndarray:
    return T * 2.0 ** -np.arange(2, finest + 1)


def _ladder_steps(h_ladder, T: float) -> tuple[np.ndarray, int]:
    h = np.sort(np.asarray(h_ladder, dtype=float))[::-1]
    if h.size < MIN_POINTS:
        raise InsufficientPointsError(f"h ladder needs >= {MIN_POINTS} rungs")
    k = np.log2(T / h)
    if np.any(np.abs(k - np.round(k)) > 1e-9):
        raise DomainError("h ladder must be dyadic fractions of T")
    k = np.round(k).astype(int)
    if k.min() < 2 or k.max() > 14:
        raise DomainError("h ladder must lie within [2**-14 T, T/4]")
    level = int(k.max())
    return 2 ** (level - k), level


def estimate_regularity(spec: ProcessSpec, rho: float, h_ladder=None, n_paths: int = 2000, rng=None) -> RegularityEstimate:
    """``phi(h) = (E|X_{t+h} - X_t|**rho)**(1/rho)`` averaged over 32 base points.

    For ``rho < 1`` the increment is replaced by the running supremum
    ``sup_{t <= s <= t+h} |X_s - X_t|`` on the simulation grid.
    """
    if rho <= 0:
        raise DomainError("rho must be positive")
    h_ladder = default_ladder(spec.T) if h_ladder is None else h_ladder
    steps, level = _ladder_steps(h_ladder, spec.T)
    grid = TimeGrid(spec.T, level)
    n = grid.n_cells
    base = np.round(np.linspace(0, 3 * n // 4, N_BASE_POINTS)).astype(int)
    sums = np.zeros(len(steps))
    factory = as_factory(spec.seed if rng is None else rng)
    for _, block in iter_path_blocks(spec, grid, n_paths, factory, "regularity"):
        x0 = block[:, base]
        for i, s in enumerate(steps):
            if rho >= 1:
                d = np.abs(block[:, base + s] - x0)
            else:
                win = np.stack([block[:, base + j] for j in range(s + 1)])
                d = np.max(np.abs(win - x0), axis=0)
            sums[i] += math.fsum((d**rho).ravel())
    phi = (sums / (n_paths * N_BASE_POINTS)) ** (1 / rho)
    h = steps * grid.h
    slope, _, _, _, se = _ols(np.log(h), np.log(phi))
    t = 2.0 if len(h) > 30 else float(_t975(len(h) - 2))
    return RegularityEstimate(slope, h, phi, rho, t * se)


def _t975(df: int) -> float:
    from scipy.stats import t

    return t.ppf(0.975, df)


# -- side by side -------------------------------------------------------------


@dataclass(frozen=True)
class RegularityRateReport:
    family: str
    rho: float
    r: float
    p: float
    regularity: RegularityEstimate
    polylog: RateFit
    subexp: RateFit | None
    curve: tuple

    @property
    def agreement(self) -> bool:
        return abs(self.regularity.b - self.polylog.param) <= AGREEMENT_TOL

    def row(self) -> str:
        c = self.subexp.param if self.subexp else float("nan")
        r2s = self.subexp.r2 if self.subexp else float("nan")
        vals = [self.regularity.b, self.polylog.param, c, self.polylog.r2, r2s]
        return ",".join(
            [self.family, f"{self.rho:g}", f"{self.r:g}", f"{self.p:g}"]
            + [f"{v:.6f}" for v in vals]
            + [str(self.agreement).lower()]
        )


def regularity_rate_report(
    spec: ProcessSpec,
    rho: float,
    r: float,
    p: float,
    budgets,
    rng=None,
    n_paths: int = 20_000,
    n_train: int = fquant.DEFAULT_TRAIN_PATHS,
    reg_paths: int = 2000,
    h_ladder=None,
    delta: float = cppq.DEFAULT_DELTA,
) -> RegularityRateReport:
    """Regularity exponent and fitted rate exponent on the same process.

    The Haar allocation uses ``phi(u) = u**b`` with the estimated ``b``; jump
    processes use the explicit Poisson quantizer instead.
    """
    factory = as_factory(spec.seed if rng is None else rng)
    reg = estimate_regularity(spec, rho, h_ladder, reg_paths, factory.child("regularity"))
    if isinstance(spec, Poisson):
        curve = cppq.cpp_distortion_curve(
            spec.lam, spec.T, spec.jump_law, r, p, delta, budgets, n_paths, factory.child("rate"), n_train
        )
    else:
        curve = fquant.distortion_curve(
            spec, max(reg.b, 0.0), r, p, budgets, n_paths, factory.child("rate"), n_train
        )
    sub = fit_subexp(curve) if min(c.N for c in curve) >= 16 else None
    return RegularityRateReport(spec.family, rho, r, p, reg, fit_polylog(curve), sub, tuple(curve))
