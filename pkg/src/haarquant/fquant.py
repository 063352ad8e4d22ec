"""Haar product quantizers of process paths and their Monte Carlo distortion."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import alloc, quant1d
from .haar import PathSample, TimeGrid, forward_coeffs, grid_lp_norm, levels_for_depth, reconstruct_values
from .errors import ResolutionError
from .procsim import ProcessSpec, iter_path_blocks
from .rng import as_factory

DEFAULT_LEVEL = 10
DEFAULT_TRAIN_PATHS = 100_000


@dataclass(frozen=True)
class DistortionReport:
    N: int
    r: float
    p: float
    estimate: float
    stderr: float
    n_paths: int
    wall_time: float = 0.0

    def __post_init__(self):
        if self.estimate < 0 or self.stderr < 0:
            raise ValueError("estimate and stderr must be non-negative")


def report_from_norms(norms: np.ndarray, N: int, r: float, p: float, wall_time: float = 0.0) -> DistortionReport:
    """``(mean |X - X^|**r)**(1/r)`` with a delta-method standard error."""
    y = np.asarray(norms, dtype=float) ** r
    n = y.size
    m = math.fsum(y) / n
    est = m ** (1 / r)
    se_m = float(np.std(y, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    se = (1 / r) * m ** (1 / r - 1) * se_m if m > 0 else 0.0
    return DistortionReport(int(N), r, p, est, se, n, wall_time)


@dataclass(frozen=True)
class ProductQuantizer:
    plan: alloc.AllocationPlan
    codebooks: tuple
    T: float = 1.0
    r: float = 2.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "codebooks", tuple(self.codebooks))
        if len(self.codebooks) != self.plan.depth:
            raise ValueError("one codebook per plan slot required")
        for j, (cb, n) in enumerate(zip(self.codebooks, self.plan.sizes)):
            if cb.size > n:
                raise ValueError(f"codebook {j} has {cb.size} points, plan allows {n}")

    @property
    def depth(self) -> int:
        return self.plan.depth

    @property
    def n_max(self) -> int:
        return levels_for_depth(self.depth)

    @property
    def cardinality(self) -> int:
        """Number of distinct quantized paths the quantizer can emit."""
        return math.prod(cb.size for cb in self.codebooks)

    def quantize_coeffs(self, coeffs: np.ndarray):
        """Quantize the first ``depth`` coefficients; the rest become 0."""
        coeffs = np.asarray(coeffs, dtype=float)
        out = np.zeros(coeffs.shape[:-1] + (2 ** (self.n_max + 1),))
        codes = np.zeros(coeffs.shape[:-1] + (self.depth,), dtype=np.intp)
        for j, cb in enumerate(self.codebooks):
            idx = cb.nearest_index(coeffs[..., j])
            codes[..., j] = idx
            out[..., j] = cb.points[idx]
        return out, codes

    def decode(self, codes: np.ndarray, levels: int) -> np.ndarray:
        codes = np.asarray(codes)
        coeffs = np.zeros(codes.shape[:-1] + (2 ** (self.n_max + 1),))
        for j, cb in enumerate(self.codebooks):
            coeffs[..., j] = cb.points[codes[..., j]]
        return reconstruct_values(coeffs, self.T, levels)

    def scaled(self, lam: float) -> "ProductQuantizer":
        return ProductQuantizer(self.plan, [cb.scaled(lam) for cb in self.codebooks], self.T, self.r, self.meta)

    def shifted(self, shift_coeffs) -> "ProductQuantizer":
        """Codebooks translated by the Haar coefficients of a fixed path.

        Only the quantized span moves; the shift path must lie in the span of
        ``e_0 .. e_{depth-1}`` for the translation identity to be exact.
        """
        shift_coeffs = np.asarray(shift_coeffs, dtype=float)
        return ProductQuantizer(
            self.plan,
            [cb.shifted(float(shift_coeffs[j])) for j, cb in enumerate(self.codebooks)],
            self.T,
            self.r,
            self.meta,
        )


def build(
    plan: alloc.AllocationPlan,
    coeff_samples,
    r: float = 2.0,
    T: float = 1.0,
    center_singletons: bool = False,
    tol: float = 1e-10,
) -> ProductQuantizer:
    """Train one Lloyd codebook per slot of size >= 2.

    Size-one slots get the codepoint 0 (or the empirical L^r centre when
    ``center_singletons``).  ``coeff_samples[j]`` holds draws of coefficient
    ``j``; a 2-D array is read column-wise.
    """
    if isinstance(coeff_samples, np.ndarray) and coeff_samples.ndim == 2:
        coeff_samples = [coeff_samples[:, j] for j in range(coeff_samples.shape[1])]
    if len(coeff_samples) < plan.depth:
        raise ValueError(f"samples cover {len(coeff_samples)} indices, plan depth is {plan.depth}")
    books = []
    for j, n in enumerate(plan.sizes):
        if n == 1 and not center_singletons:
            books.append(quant1d.Codebook1D(np.zeros(1), r))
        else:
            books.append(quant1d.train_lloyd(coeff_samples[j], n, r, tol=tol, allow_fewer=True))
    n_train = len(coeff_samples[0]) if len(coeff_samples) else 0
    return ProductQuantizer(plan, books, T, r, {"n_train": n_train, "r": r})


def quantize_path(q: ProductQuantizer, path: PathSample):
    """Return ``(quantized path, code indices)``."""
    if path.grid.levels < q.n_max + 1:
        raise ResolutionError(f"path level {path.grid.levels} below quantizer need {q.n_max + 1}")
    coeffs = forward_coeffs(path.values, path.grid.T, q.n_max)
    qc, codes = q.quantize_coeffs(coeffs)
    return PathSample(path.grid, reconstruct_values(qc, q.T, path.grid.levels)), codes


def path_errors(q: ProductQuantizer, paths: np.ndarray, T: float, p: float) -> np.ndarray:
    """Per-path ``|X - X^|_{L^p}`` for a batch of grid paths."""
    levels = int(round(math.log2(paths.shape[-1] - 1)))
    coeffs = forward_coeffs(paths, T, q.n_max)
    qc, _ = q.quantize_coeffs(coeffs)
    return grid_lp_norm(paths - reconstruct_values(qc, T, levels), T, p)


def distortion_on_paths(q: ProductQuantizer, paths: np.ndarray, r: float, p: float, T: float | None = None) -> DistortionReport:
    t0 = time.perf_counter()
    T = q.T if T is None else T
    norms = path_errors(q, np.atleast_2d(paths), T, p)
    return report_from_norms(norms, q.plan.N, r, p, time.perf_counter() - t0)


def coefficient_samples(
    spec: ProcessSpec,
    n_max: int,
    n_train: int = DEFAULT_TRAIN_PATHS,
    level: int = DEFAULT_LEVEL,
    rng=None,
    purpose: str = "train",
) -> np.ndarray:
    """``(n_train, 2**(n_max+1))`` Haar coefficients of independent training paths."""
    grid = TimeGrid(spec.T, max(level, n_max + 1))
    out = np.empty((n_train, 2 ** (n_max + 1)))
    for start, block in iter_path_blocks(spec, grid, n_train, rng, purpose):
        out[start : start + block.shape[0]] = forward_coeffs(block, spec.T, n_max)
    return out


def eval_level(q_or_depth, level: int = DEFAULT_LEVEL) -> int:
    depth = q_or_depth.depth if isinstance(q_or_depth, ProductQuantizer) else int(q_or_depth)
    return max(level, levels_for_depth(depth) + 1 + 3)


def _evaluate(quantizers, spec: ProcessSpec, r: float, p: float, n_paths: int, rng, level: int, purpose: str):
    """Distortion reports of several quantizers on one common set of fresh paths."""
    level = max(eval_level(q, level) for q in quantizers)
    grid = TimeGrid(spec.T, level)
    norms = [np.empty(n_paths) for _ in quantizers]
    elapsed = [0.0] * len(quantizers)
    for start, block in iter_path_blocks(spec, grid, n_paths, rng, purpose):
        for i, q in enumerate(quantizers):
            t0 = time.perf_counter()
            norms[i][start : start + block.shape[0]] = path_errors(q, block, spec.T, p)
            elapsed[i] += time.perf_counter() - t0
    return [report_from_norms(nm, q.plan.N, r, p, el) for nm, q, el in zip(norms, quantizers, elapsed)]


def estimate_distortion(
    q: ProductQuantizer,
    spec: ProcessSpec,
    r: float,
    p: float,
    n_paths: int,
    rng=None,
    level: int = DEFAULT_LEVEL,
) -> DistortionReport:
    """Monte Carlo ``|| |X - X^|_{L^p} ||_r`` on fresh paths (substream ``eval``)."""
    factory = as_factory(spec.seed if rng is None else rng)
    return _evaluate([q], spec, r, p, n_paths, factory, level, "eval")[0]


def weights_for(phi) -> alloc.PhiWeights:
    if isinstance(phi, alloc.PhiWeights):
        return phi
    if isinstance(phi, (int, float)):
        return alloc.power_weights(float(phi))
    return alloc.PhiWeights(phi)


def build_for_budgets(
    spec: ProcessSpec,
    phi,
    r: float,
    N_list,
    n_train: int = DEFAULT_TRAIN_PATHS,
    rng=None,
    level: int = DEFAULT_LEVEL,
    fill: bool = True,
    center_singletons: bool = False,
) -> list[ProductQuantizer]:
    """Allocate and train one quantizer per budget from a shared training batch."""
    weights = weights_for(phi)
    factory = as_factory(spec.seed if rng is None else rng)
    plans = [alloc.allocate_phi(weights, int(N), fill=fill) for N in N_list]
    n_max = max(levels_for_depth(pl.depth) for pl in plans)
    samples = coefficient_samples(spec, n_max, n_train, level, factory, "train")
    out = []
    for pl in plans:
        q = build(pl, samples, r, spec.T, center_singletons)
        q.meta.update({"train_stream": factory.stream_id("train"), "train_level": level})
        out.append(q)
    return out


def distortion_curve(
    spec: ProcessSpec,
    phi,
    r: float,
    p: float,
    N_list,
    n_paths: int,
    rng=None,
    n_train: int = DEFAULT_TRAIN_PATHS,
    level: int = DEFAULT_LEVEL,
    fill: bool = True,
    return_quantizers: bool = False,
):
    """For each budget: allocate, train, estimate.  One eval batch serves all budgets."""
    N_list = [int(N) for N in N_list]
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("budgets must be increasing")
    factory = as_factory(spec.seed if rng is None else rng)
    qs = build_for_budgets(spec, phi, r, N_list, n_train, factory, level, fill)
    reports = _evaluate(qs, spec, r, p, n_paths, factory, level, "eval")
    return (reports, qs) if return_quantizers else reports
