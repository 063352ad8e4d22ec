"""Path simulation on dyadic grids.

Jump processes follow the intensity-one convention: arrivals ``S_n`` are
partial sums of unit exponentials compared with ``lam * T``, and the physical
jump time is ``S_n / lam``.  Grid values of jump paths are cadlag values.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc, gammaln

from .errors import DomainError
from .haar import PathSample, TimeGrid
from .rng import BLOCK_SIZE, StreamFactory, as_factory, blocks

CHOLESKY_MAX_LEVEL = 12
THREADS_ENV = "HAARQUANT_THREADS"
_default_threads = max(1, int(os.environ.get(THREADS_ENV, "1") or 1))


def set_default_threads(n: int) -> None:
    """Worker threads used when a simulation call does not say (results never depend on it)."""
    global _default_threads
    if int(n) < 1:
        raise ValueError("thread count must be >= 1")
    _default_threads = int(n)


def default_threads() -> int:
    return _default_threads


# -- specs --------------------------------------------------------------------


@dataclass(frozen=True, kw_only=True)
class ProcessSpec:
    T: float = 1.0
    seed: int = 0

    family = "process"

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError(f"horizon T must be positive, got {self.T}")

    @property
    def is_jump(self) -> bool:
        return False


@dataclass(frozen=True, kw_only=True)
class Brownian(ProcessSpec):
    family = "brownian"


@dataclass(frozen=True, kw_only=True)
class FBM(ProcessSpec):
    H: float = 0.5
    family = "fbm"

    def __post_init__(self):
        super().__post_init__()
        if not 0 < self.H < 1:
            raise DomainError(f"Hurst index must lie in (0, 1), got {self.H}")


@dataclass(frozen=True, kw_only=True)
class Stable(ProcessSpec):
    """Symmetric alpha-stable Levy process, ``E exp(iu X_1) = exp(-|u|**alpha)``."""

    alpha: float = 1.5
    family = "stable"

    def __post_init__(self):
        super().__post_init__()
        if not 0 < self.alpha < 2:
            raise DomainError(f"stability index must lie in (0, 2), got {self.alpha}")


@dataclass(frozen=True, kw_only=True)
class Gamma(ProcessSpec):
    """Gamma subordinator: ``X_t`` has shape ``t`` and rate ``alpha``."""

    alpha: float = 1.0
    family = "gamma"

    def __post_init__(self):
        super().__post_init__()
        if not self.alpha > 0:
            raise DomainError(f"gamma rate must be positive, got {self.alpha}")


@dataclass(frozen=True)
class JumpLaw:
    kind: str = "gaussian"
    params: tuple = ()

    _DEFAULTS = {
        "gaussian": (0.0, 1.0),  # mean, std
        "uniform": (0.0, 1.0),  # low, high
        "exponential": (1.0,),  # scale
        "twopoint": (-1.0, 1.0, 0.5),  # a, b, P(b)
    }

    def __post_init__(self):
        if self.kind not in self._DEFAULTS:
            raise DomainError(f"unknown jump law {self.kind!r}")
        params = tuple(self.params) or self._DEFAULTS[self.kind]
        if len(params) != len(self._DEFAULTS[self.kind]):
            raise DomainError(f"{self.kind} jump law takes {len(self._DEFAULTS[self.kind])} parameters")
        object.__setattr__(self, "params", tuple(float(x) for x in params))

    def sample(self, gen: np.random.Generator, size) -> np.ndarray:
        p = self.params
        if self.kind == "gaussian":
            return gen.normal(p[0], p[1], size)
        if self.kind == "uniform":
            return gen.uniform(p[0], p[1], size)
        if self.kind == "exponential":
            return gen.exponential(p[0], size)
        return np.where(gen.random(size) < p[2], p[1], p[0])


@dataclass(frozen=True, kw_only=True)
class Poisson(ProcessSpec):
    lam: float = 1.0
    family = "poisson"

    def __post_init__(self):
        super().__post_init__()
        if self.lam < 0:
            raise DomainError(f"intensity must be >= 0, got {self.lam}")

    @property
    def is_jump(self) -> bool:
        return True

    @property
    def jump_law(self) -> JumpLaw | None:
        return None


@dataclass(frozen=True, kw_only=True)
class CompoundPoisson(Poisson):
    jump: JumpLaw = field(default_factory=JumpLaw)
    family = "compound_poisson"

    @property
    def jump_law(self) -> JumpLaw:
        return self.jump


# -- jump records -------------------------------------------------------------


@dataclass(frozen=True)
class JumpRecord:
    """Arrivals ``S_n <= lam T`` (intensity-one scale) and their jump sizes."""

    arrivals: np.ndarray
    sizes: np.ndarray
    lam: float
    T: float

    def __post_init__(self):
        if np.any(np.diff(self.arrivals) <= 0):
            raise ValueError("arrivals must be strictly increasing")
        if self.arrivals.shape != self.sizes.shape:
            raise ValueError("arrivals and sizes differ in length")

    @property
    def times(self) -> np.ndarray:
        return self.arrivals / self.lam


@dataclass(frozen=True)
class JumpBatch:
    """Arrivals for many paths, padded to a common width.

    ``S[i, n-1]`` is the ``n``-th arrival of path ``i`` (possibly beyond
    ``lam T``); every row has at least one arrival beyond ``lam T``.
    """

    S: np.ndarray
    U: np.ndarray
    lam: float
    T: float

    @property
    def lamT(self) -> float:
        return self.lam * self.T

    @property
    def n_paths(self) -> int:
        return self.S.shape[0]

    def counts(self) -> np.ndarray:
        return np.count_nonzero(self.S <= self.lamT, axis=1)

    def record(self, i: int) -> JumpRecord:
        keep = self.S[i] <= self.lamT
        return JumpRecord(self.S[i][keep], self.U[i][keep], self.lam, self.T)

    def arrivals_to(self, depth: int) -> np.ndarray:
        """``S_1 .. S_depth`` per path, drawing no new randomness (inf-padded)."""
        out = np.full((self.n_paths, depth), np.inf)
        w = min(depth, self.S.shape[1])
        out[:, :w] = self.S[:, :w]
        return out


def _jump_block(lamT: float, n: int, gen: np.random.Generator, law: JumpLaw | None):
    width = max(4, int(math.ceil(lamT + 6 * math.sqrt(lamT) + 6)))
    Z = gen.exponential(1.0, (n, width))
    S = np.cumsum(Z, axis=1)
    while np.any(S[:, -1] <= lamT):
        extra = np.cumsum(gen.exponential(1.0, (n, width)), axis=1) + S[:, -1:]
        S = np.concatenate([S, extra], axis=1)
    U = np.ones_like(S) if law is None else law.sample(gen, S.shape)
    return S, U


def simulate_jump_batch(spec: Poisson, n_paths: int, rng=None, purpose: str = "paths") -> JumpBatch:
    factory = as_factory(spec.seed if rng is None else rng)
    lamT = spec.lam * spec.T
    parts = [
        _jump_block(lamT, stop - start, factory.generator(purpose, b), spec.jump_law)
        for b, start, stop in blocks(n_paths)
    ]
    width = max(s.shape[1] for s, _ in parts)

    def pad(a, fill):
        return np.pad(a, ((0, 0), (0, width - a.shape[1])), constant_values=fill)

    S = np.concatenate([pad(s, np.inf) for s, _ in parts])
    U = np.concatenate([pad(u, 0.0) for _, u in parts])
    return JumpBatch(S, U, spec.lam, spec.T)


def simulate_jumps(spec: Poisson, T: float | None = None, rng=None) -> JumpRecord:
    """One jump record; ``rng`` may be a ``numpy.random.Generator``."""
    T = spec.T if T is None else T
    lamT = spec.lam * T
    gen = rng if isinstance(rng, np.random.Generator) else as_factory(spec.seed if rng is None else rng).generator("jumps")
    if lamT == 0:
        return JumpRecord(np.empty(0), np.empty(0), spec.lam, T)
    S, U = _jump_block(lamT, 1, gen, spec.jump_law)
    keep = S[0] <= lamT
    return JumpRecord(S[0][keep], U[0][keep], spec.lam, T)


def jump_paths_on_grid(S: np.ndarray, U: np.ndarray, lam: float, grid: TimeGrid) -> np.ndarray:
    """Cadlag grid values of ``sum_n U_n 1{S_n <= lam t}`` (batched over rows)."""
    S = np.atleast_2d(S)
    U = np.atleast_2d(U)
    n_points = grid.n_cells + 1
    idx = np.searchsorted(lam * grid.times(), S.ravel(), side="left")
    rows = np.repeat(np.arange(S.shape[0]), S.shape[1])
    ok = idx < n_points
    incr = np.zeros((S.shape[0], n_points))
    np.add.at(incr, (rows[ok], idx[ok]), U.ravel()[ok])
    return np.cumsum(incr, axis=1)


def erlang_tail_prob(n: int, lamT: float) -> float:
    """``P(S_n <= lamT)`` for ``S_n ~ Gamma(n, 1)``."""
    if lamT <= 0:
        return 0.0
    return float(gammainc(n, lamT))


def erlang_tail_bound(n: int, lamT: float) -> float:
    """``(lamT)**n / n!``."""
    return 0.0 if lamT <= 0 else math.exp(n * math.log(lamT) - gammaln(n + 1))


def erlang_truncated_sampler(n: int, lamT: float, gen: np.random.Generator, size=None) -> np.ndarray:
    """Draws of ``S_n ~ Gamma(n, 1)``; truncation at ``lamT`` is left to the caller."""
    if n < 1 or lamT <= 0:
        raise DomainError("need n >= 1 and lamT > 0")
    return gen.gamma(n, 1.0, size)


def truncated_arrival_samples(n: int, lamT: float, gen: np.random.Generator, size: int) -> np.ndarray:
    """Draws of ``S_n 1{S_n <= lamT}``."""
    s = erlang_truncated_sampler(n, lamT, gen, size)
    return np.where(s <= lamT, s, 0.0)


# -- continuous families ----------------------------------------------------------


def fbm_increment_covariance(H: float, n: int, h: float) -> np.ndarray:
    """Exact covariance matrix of ``n`` fBm increments over steps of length ``h``."""
    k = np.arange(n, dtype=float)
    g = 0.5 * h ** (2 * H) * (np.abs(k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))
    i = np.arange(n)
    return g[np.abs(i[:, None] - i[None, :])]


def _fgn_eigenvalues(H: float, n: int, h: float) -> np.ndarray:
    k = np.arange(n + 1, dtype=float)
    g = 0.5 * h ** (2 * H) * (np.abs(k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))
    c = np.concatenate([g, g[-2:0:-1]])
    return np.fft.fft(c).real


def _fgn_block(H: float, n: int, h: float, m: int, gen: np.random.Generator) -> np.ndarray:
    lam = _fgn_eigenvalues(H, n, h)
    if lam.min() < -1e-12 * lam.max():
        if math.log2(n) > CHOLESKY_MAX_LEVEL:
            raise DomainError("circulant embedding failed and grid too fine for Cholesky")
        chol = np.linalg.cholesky(fbm_increment_covariance(H, n, h))
        return gen.standard_normal((m, n)) @ chol.T
    w = np.sqrt(np.maximum(lam, 0.0) / (2 * n))
    xi = gen.standard_normal((m, 2 * n)) + 1j * gen.standard_normal((m, 2 * n))
    return np.fft.fft(w * xi, axis=1)[:, :n].real


def _stable_variates(alpha: float, gen: np.random.Generator, size) -> np.ndarray:
    """Chambers-Mallows-Stuck, symmetric case, unit scale."""
    V = gen.uniform(-math.pi / 2, math.pi / 2, size)
    W = gen.exponential(1.0, size)
    if alpha == 1:
        return np.tan(V)
    return (
        np.sin(alpha * V)
        / np.cos(V) ** (1 / alpha)
        * (np.cos((1 - alpha) * V) / W) ** ((1 - alpha) / alpha)
    )


def _increments(spec: ProcessSpec, grid: TimeGrid, m: int, gen: np.random.Generator) -> np.ndarray:
    n, h = grid.n_cells, grid.h
    if isinstance(spec, Brownian):
        return gen.normal(0.0, math.sqrt(h), (m, n))
    if isinstance(spec, FBM):
        return _fgn_block(spec.H, n, h, m, gen)
    if isinstance(spec, Stable):
        return h ** (1 / spec.alpha) * _stable_variates(spec.alpha, gen, (m, n))
    if isinstance(spec, Gamma):
        return gen.gamma(h, 1.0 / spec.alpha, (m, n))
    raise TypeError(f"no increment sampler for {type(spec).__name__}")


def _path_block(spec: ProcessSpec, grid: TimeGrid, m: int, gen: np.random.Generator) -> np.ndarray:
    if grid.T != spec.T:
        raise DomainError(f"grid horizon {grid.T} differs from process horizon {spec.T}")
    if spec.is_jump:
        if spec.lam == 0:
            return np.zeros((m, grid.n_cells + 1))
        S, U = _jump_block(spec.lam * spec.T, m, gen, spec.jump_law)
        return jump_paths_on_grid(S, U, spec.lam, grid)
    inc = _increments(spec, grid, m, gen)
    out = np.zeros((m, grid.n_cells + 1))
    np.cumsum(inc, axis=1, out=out[:, 1:])
    return out


def simulate_paths(
    spec: ProcessSpec,
    grid: TimeGrid,
    n_paths: int,
    rng=None,
    purpose: str = "paths",
    threads: int | None = None,
) -> np.ndarray:
    """``(n_paths, 2**L + 1)`` array of grid paths.

    Path ``i`` always comes from substream ``(purpose, i // BLOCK_SIZE)``, so
    the output does not depend on ``threads``.
    """
    factory = as_factory(spec.seed if rng is None else rng)

    def work(item):
        b, start, stop = item
        return _path_block(spec, grid, stop - start, factory.generator(purpose, b))

    threads = _default_threads if threads is None else threads
    items = list(blocks(n_paths, BLOCK_SIZE))
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, items))
    else:
        parts = [work(it) for it in items]
    if not parts:
        return np.zeros((0, grid.n_cells + 1))
    return np.concatenate(parts)


def iter_path_blocks(spec: ProcessSpec, grid: TimeGrid, n_paths: int, rng=None, purpose: str = "paths", threads: int | None = None):
    """Yield ``(start, block)`` pairs; same numbers as ``simulate_paths``.

    With several threads, up to ``threads`` blocks are simulated ahead.
    """
    factory = as_factory(spec.seed if rng is None else rng)
    threads = _default_threads if threads is None else threads

    def work(item):
        b, start, stop = item
        return start, _path_block(spec, grid, stop - start, factory.generator(purpose, b))

    items = list(blocks(n_paths, BLOCK_SIZE))
    if threads <= 1:
        for it in items:
            yield work(it)
        return
    with ThreadPoolExecutor(threads) as pool:
        for i in range(0, len(items), threads):
            yield from pool.map(work, items[i : i + threads])


def simulate(spec: ProcessSpec, grid: TimeGrid, rng=None) -> PathSample:
    """A single path; ``rng`` may be a Generator, a StreamFactory or a seed."""
    if isinstance(rng, np.random.Generator):
        return PathSample(grid, _path_block(spec, grid, 1, rng)[0])
    return PathSample(grid, simulate_paths(spec, grid, 1, rng)[0])


def spec_from_dict(d: dict) -> ProcessSpec:
    """Build a spec from a plain mapping with a ``family`` key."""
    d = dict(d)
    family = d.pop("family")
    classes = {c.family: c for c in (Brownian, FBM, Stable, Gamma, Poisson, CompoundPoisson)}
    if family not in classes:
        raise DomainError(f"unknown process family {family!r}")
    if family == "compound_poisson" and "jump" in d:
        j = d.pop("jump")
        d["jump"] = j if isinstance(j, JumpLaw) else JumpLaw(j.get("kind", "gaussian"), tuple(j.get("params", ())))
    return classes[family](**d)


__all__ = [
    "set_default_threads",
    "default_threads",
    "StreamFactory",
    "ProcessSpec",
    "Brownian",
    "FBM",
    "Stable",
    "Gamma",
    "Poisson",
    "CompoundPoisson",
    "JumpLaw",
    "JumpRecord",
    "JumpBatch",
    "simulate",
    "simulate_paths",
    "iter_path_blocks",
    "simulate_jumps",
    "simulate_jump_batch",
    "jump_paths_on_grid",
    "erlang_tail_prob",
    "erlang_tail_bound",
    "erlang_truncated_sampler",
    "truncated_arrival_samples",
    "fbm_increment_covariance",
    "spec_from_dict",
]
