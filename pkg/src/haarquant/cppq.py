"""Explicit quantizer of (compound) Poisson paths.

Arrival ``n`` is quantized on its own censored codebook
``alpha_n = alpha'_n U {lam T}``, where ``alpha'_n`` is an optimal
``(N_n - 1)``-point quantizer of ``S_n 1{S_n <= lam T}`` and the sentinel
``lam T`` means "no jump before the horizon".  Jump sizes get their own
codebooks under a second budget; the two budgets multiply to at most ``N``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import alloc, quant1d
from .errors import BudgetError, DomainError
from .fquant import DistortionReport, report_from_norms
from .haar import TimeGrid
from .procsim import (
    CompoundPoisson,
    JumpBatch,
    JumpLaw,
    JumpRecord,
    Poisson,
    jump_paths_on_grid,
    simulate_jump_batch,
    truncated_arrival_samples,
)
from .rng import as_factory

DEFAULT_DELTA = 0.5
DEFAULT_EPS = 0.05
DEFAULT_TRAIN = 100_000


def budget_split(N: int, r: float, p: float, eps: float = DEFAULT_EPS) -> tuple[int, int]:
    """``N1 = [N**(r c^2 / (1 + r c^2))]``, ``N2 = [N**(1 / (1 + r c^2))]`` with ``c = 1/sqrt(pr) - eps``."""
    c = 1 / math.sqrt(p * r) - eps
    if c <= 0:
        raise DomainError("split constant must be positive; lower eps")
    rc2 = r * c * c
    log_N = math.log(N)
    n1 = alloc._log_floor(log_N * rc2 / (1 + rc2))
    n2 = alloc._log_floor(log_N / (1 + rc2))
    if n1 < 1 or n2 < 1:
        raise BudgetError(f"budget {N} too small to split ({n1}, {n2})")
    return n1, n2


@dataclass(frozen=True)
class PoissonQuantizer:
    time_books: tuple
    size_books: tuple
    size_default: quant1d.Codebook1D | None
    lam: float
    T: float
    r: float
    p: float
    delta: float
    N: int
    N1: int
    N2: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "time_books", tuple(self.time_books))
        object.__setattr__(self, "size_books", tuple(self.size_books))
        lamT = self.lamT
        for n, cb in enumerate(self.time_books, 1):
            if cb.points[-1] != lamT or cb.censor != lamT:
                raise ValueError(f"time book {n} must end with the sentinel {lamT}")
        if self.N1 * self.N2 > self.N:
            raise BudgetError("N1 * N2 exceeds N")

    @property
    def lamT(self) -> float:
        return self.lam * self.T

    @property
    def time_depth(self) -> int:
        return len(self.time_books)

    @property
    def is_compound(self) -> bool:
        return self.size_default is not None

    @property
    def time_cardinality(self) -> int:
        return math.prod(cb.size for cb in self.time_books)

    @property
    def size_cardinality(self) -> int:
        return math.prod(cb.size for cb in self.size_books) if self.size_books else 1

    @property
    def cardinality(self) -> int:
        return self.time_cardinality * self.size_cardinality

    def quantize_arrivals(self, S: np.ndarray) -> np.ndarray:
        """``S`` of shape ``(P, >= 0)``; returns ``(P, time_depth)`` quantized arrivals."""
        P = S.shape[0]
        out = np.empty((P, self.time_depth))
        for n, cb in enumerate(self.time_books):
            s = S[:, n] if n < S.shape[1] else np.full(P, np.inf)
            out[:, n] = cb.quantize(np.minimum(s, self.lamT))
        return out

    def quantize_sizes(self, U: np.ndarray, width: int) -> np.ndarray:
        """Quantized sizes for slots ``1 .. width`` (ones for the standard process)."""
        P = U.shape[0]
        if not self.is_compound:
            return np.ones((P, width))
        out = np.empty((P, width))
        for n in range(width):
            u = U[:, n] if n < U.shape[1] else np.zeros(P)
            cb = self.size_books[n] if n < len(self.size_books) else self.size_default
            out[:, n] = cb.quantize(u)
        return out


def _time_book(samples: np.ndarray, size: int, r_time: float, lamT: float) -> quant1d.Codebook1D:
    if size == 1:
        return quant1d.Codebook1D(np.array([lamT]), r_time, censor=lamT)
    cb = quant1d.train_lloyd(samples, size - 1, r_time, allow_fewer=True)
    pts = cb.points[cb.points < lamT]
    return quant1d.Codebook1D(np.append(pts, lamT), r_time, censor=lamT)


def build_poisson_quantizer(
    lam: float,
    T: float,
    r: float,
    p: float,
    delta: float,
    N: int,
    jump_law: JumpLaw | None = None,
    n_train: int = DEFAULT_TRAIN,
    rng=None,
    eps: float = DEFAULT_EPS,
    A: float | None = None,
) -> PoissonQuantizer:
    """Censored arrival codebooks plus, for the compound case, size codebooks.

    ``A`` defaults to ``(lam T)**(1/(r + delta))``.  The standard process
    spends the whole budget on arrivals.
    """
    if N < 1:
        raise BudgetError(f"budget must be >= 1, got {N}")
    if r < 1 or not 1 <= p <= r:
        raise DomainError(f"need r >= 1 and 1 <= p <= r, got r={r}, p={p}")
    if not (lam > 0 and T > 0 and delta > 0):
        raise DomainError("lam, T and delta must be positive")
    factory = as_factory(rng)
    lamT = lam * T
    N1, N2 = (N, 1) if jump_law is None else (budget_split(N, r, p, eps) if N >= 2 else (1, 1))
    mu_p = r + delta
    A_time = lamT ** (1 / mu_p) if A is None else A
    time_plan = alloc.allocate_factorial(alloc.FactorialWeights(A_time, mu_p), N1, p)
    r_time = r / p
    gen = factory.generator("train-arrivals")
    books = []
    for n, size in enumerate(time_plan.sizes, 1):
        samples = truncated_arrival_samples(n, lamT, gen, n_train) if size > 1 else None
        books.append(_time_book(samples, size, r_time, lamT))
    size_books, size_default = [], None
    if jump_law is not None:
        ugen = factory.generator("train-sizes")
        u = quant1d.SampleSet(jump_law.sample(ugen, n_train), law=jump_law.kind)
        size_plan = alloc.allocate_factorial(alloc.FactorialWeights(lamT ** (1 / r), r), N2, 1.0)
        size_books = [quant1d.train_lloyd(u, s, r, allow_fewer=True) for s in size_plan.sizes]
        size_default = quant1d.train_lloyd(u, 1, r)
    return PoissonQuantizer(
        books, size_books, size_default, lam, T, r, p, delta, N, N1, N2,
        {"n_train": n_train, "time_sizes": time_plan.sizes,
         "train_streams": (factory.stream_id("train-arrivals"), factory.stream_id("train-sizes"))},
    )


@dataclass(frozen=True)
class QuantizedJumpPath:
    arrivals: np.ndarray
    sizes: np.ndarray
    lamT: float
    lam: float
    values: np.ndarray | None = None

    @property
    def active(self) -> np.ndarray:
        """Slots carrying a jump (non-sentinel arrivals)."""
        return self.arrivals < self.lamT


def quantize_jump_path(q: PoissonQuantizer, jumps: JumpRecord, grid: TimeGrid | None = None) -> QuantizedJumpPath:
    S = jumps.arrivals[None, :]
    s_hat = q.quantize_arrivals(S)[0]
    u_hat = q.quantize_sizes(jumps.sizes[None, :], q.time_depth)[0]
    values = None
    if grid is not None:
        active = s_hat < q.lamT
        values = jump_paths_on_grid(s_hat[active][None, :], u_hat[active][None, :], q.lam, grid)[0]
    return QuantizedJumpPath(s_hat, u_hat, q.lamT, q.lam, values)


# -- exact distances between step paths ---------------------------------------------


def step_lp_norm(times: np.ndarray, jumps: np.ndarray, T: float, p: float) -> np.ndarray:
    """``|f|_{L^p[0,T]}`` of ``f(t) = sum_k jumps[k] 1{times[k] <= t}`` (batched rows).

    Times at or beyond ``T`` (including ``inf``) contribute nothing.
    """
    times = np.atleast_2d(np.asarray(times, dtype=float))
    jumps = np.atleast_2d(np.asarray(jumps, dtype=float))
    t = np.minimum(times, T)
    order = np.argsort(t, axis=1, kind="stable")
    t = np.take_along_axis(t, order, axis=1)
    v = np.cumsum(np.take_along_axis(jumps, order, axis=1), axis=1)
    dt = np.diff(np.concatenate([t, np.full((t.shape[0], 1), T)], axis=1), axis=1)
    if p == 1:
        s = np.sum(np.abs(v) * dt, axis=1)
    else:
        s = np.sum(np.abs(v) ** p * dt, axis=1)
    return s ** (1 / p)


def _true_events(batch: JumpBatch):
    S, U = batch.S, batch.U
    t = np.where(S <= batch.lamT, S / batch.lam, np.inf)
    return t, np.where(np.isfinite(t), U, 0.0)


def _quantized_events(q: PoissonQuantizer, batch: JumpBatch, U_for_jumps: np.ndarray):
    s_hat = q.quantize_arrivals(batch.S)
    t = np.where(s_hat < q.lamT, s_hat / q.lam, np.inf)
    return t, np.where(np.isfinite(t), U_for_jumps, 0.0)


def path_errors(q: PoissonQuantizer, batch: JumpBatch, p: float) -> np.ndarray:
    """Per-path ``|X - X^|_{L^p}``, exact for step paths."""
    t_true, u_true = _true_events(batch)
    u_hat = q.quantize_sizes(batch.U, q.time_depth)
    t_q, u_q = _quantized_events(q, batch, u_hat)
    times = np.concatenate([t_true, t_q], axis=1)
    jumps = np.concatenate([u_true, -u_q], axis=1)
    return step_lp_norm(times, jumps, q.T, p)


def decoupled_errors(q: PoissonQuantizer, batch: JumpBatch, p: float):
    """Per-path ``(|X - X^|, |X - K^{U^}|, |K^{U^} - K^^{U^}|)`` in ``L^p``.

    ``K^{U^}`` keeps the true arrivals with quantized sizes; ``K^^{U^}`` is the
    full quantization.  Pathwise, the first is at most the sum of the others.
    """
    t_true, u_true = _true_events(batch)
    width = t_true.shape[1]
    u_hat_all = q.quantize_sizes(batch.U, max(width, q.time_depth))
    u_hat_true = np.where(np.isfinite(t_true), u_hat_all[:, :width], 0.0)
    t_q, u_q = _quantized_events(q, batch, u_hat_all[:, : q.time_depth])
    total = step_lp_norm(np.concatenate([t_true, t_q], 1), np.concatenate([u_true, -u_q], 1), q.T, p)
    sizes_only = step_lp_norm(np.concatenate([t_true, t_true], 1), np.concatenate([u_true, -u_hat_true], 1), q.T, p)
    times_only = step_lp_norm(np.concatenate([t_true, t_q], 1), np.concatenate([u_hat_true, -u_q], 1), q.T, p)
    return total, sizes_only, times_only


def estimate_distortion(q: PoissonQuantizer, spec: Poisson, r: float, p: float, n_paths: int, rng=None) -> DistortionReport:
    factory = as_factory(spec.seed if rng is None else rng)
    batch = simulate_jump_batch(spec, n_paths, factory, "eval")
    t0 = time.perf_counter()
    norms = path_errors(q, batch, p)
    return report_from_norms(norms, q.N, r, p, time.perf_counter() - t0)


def cpp_distortion_curve(
    lam: float,
    T: float,
    jump_law: JumpLaw | None,
    r: float,
    p: float,
    delta: float,
    N_list,
    n_paths: int,
    rng=None,
    n_train: int = DEFAULT_TRAIN,
    eps: float = DEFAULT_EPS,
    return_quantizers: bool = False,
):
    """Distortion per budget on one shared batch of fresh paths."""
    N_list = [int(N) for N in N_list]
    if any(N < 2 for N in N_list):
        raise BudgetError("budgets must be >= 2")
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("budgets must be increasing")
    factory = as_factory(rng)
    spec = Poisson(lam=lam, T=T) if jump_law is None else CompoundPoisson(lam=lam, T=T, jump=jump_law)
    batch = simulate_jump_batch(spec, n_paths, factory, "eval")
    reports, qs = [], []
    for N in N_list:
        t0 = time.perf_counter()
        q = build_poisson_quantizer(lam, T, r, p, delta, N, jump_law, n_train, factory, eps)
        reports.append(report_from_norms(path_errors(q, batch, p), N, r, p, time.perf_counter() - t0))
        qs.append(q)
    return (reports, qs) if return_quantizers else reports
