"""Optimal scalar quantization: Lloyd training, an exact DP oracle, distortion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSampleError, SizeGuardError
from .rng import as_factory

DP_MAX_SAMPLES = 10_000
DP_MAX_SIZE = 64


@dataclass(frozen=True)
class Codebook1D:
    points: np.ndarray
    r: float = 2.0
    censor: float | None = None

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=float))
        if pts.ndim != 1 or pts.size < 1:
            raise ValueError("codebook needs at least one point")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("codebook points must be strictly increasing")
        if not np.all(np.isfinite(pts)):
            raise ValueError("codebook points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.size

    def __len__(self):
        return self.points.size

    def scaled(self, lam: float) -> "Codebook1D":
        if not lam > 0:
            raise ValueError("scale must be positive")
        censor = None if self.censor is None else lam * self.censor
        return Codebook1D(lam * self.points, self.r, censor)

    def shifted(self, c: float) -> "Codebook1D":
        censor = None if self.censor is None else self.censor + c
        return Codebook1D(self.points + c, self.r, censor)

    def nearest_index(self, x) -> np.ndarray:
        """Vectorised nearest-neighbour index; ties go to the lower codepoint."""
        x = np.asarray(x, dtype=float)
        pts = self.points
        hi = np.clip(np.searchsorted(pts, x), 1, pts.size - 1) if pts.size > 1 else None
        if hi is None:
            return np.zeros(x.shape, dtype=np.intp)
        lo = hi - 1
        take_lo = np.abs(x - pts[lo]) <= np.abs(x - pts[hi])
        return np.where(take_lo, lo, hi)

    def quantize(self, x) -> np.ndarray:
        return self.points[self.nearest_index(x)]


@dataclass(frozen=True)
class SampleSet:
    values: np.ndarray
    law: str = ""
    sorted_values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0:
            raise ValueError("sample set is empty")
        if not np.all(np.isfinite(v)):
            raise ValueError("samples must be finite")
        v.setflags(write=False)
        s = np.sort(v)
        s.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "sorted_values", s)

    @property
    def size(self) -> int:
        return self.values.size


def _as_samples(samples) -> SampleSet:
    return samples if isinstance(samples, SampleSet) else SampleSet(samples)


def nearest(cb: Codebook1D, x: float) -> tuple[int, float]:
    i = int(cb.nearest_index(x))
    return i, float(cb.points[i])


def distortion(cb: Codebook1D, samples, r: float | None = None) -> float:
    """``(mean_x min_a |x - a|**r)**(1/r)`` over the samples."""
    s = _as_samples(samples)
    r = cb.r if r is None else r
    err = np.abs(s.values - cb.quantize(s.values))
    if r == 2:
        m = float(np.dot(err, err)) / err.size
    else:
        m = float(np.mean(err**r))
    return m ** (1.0 / r)


# -- Lloyd ------------------------------------------------------------------


class _SortedCells:
    """Prefix sums over sorted samples for O(1) cell statistics."""

    def __init__(self, xs: np.ndarray):
        self.xs = xs
        self.n = xs.size
        self.s1 = np.concatenate([[0.0], np.cumsum(xs)])
        self.s2 = np.concatenate([[0.0], np.cumsum(xs * xs)])

    def cuts(self, points: np.ndarray) -> np.ndarray:
        """Cell boundaries; samples exactly at a midpoint go to the lower cell."""
        mids = 0.5 * (points[:-1] + points[1:])
        return np.concatenate([[0], np.searchsorted(self.xs, mids, side="right"), [self.n]])

    def centers(self, cuts: np.ndarray, r: float, tol: float) -> np.ndarray:
        lo, hi = cuts[:-1], cuts[1:]
        cnt = hi - lo
        if r == 2:
            return (self.s1[hi] - self.s1[lo]) / cnt
        xs = self.xs
        if r == 1:
            return 0.5 * (xs[lo + (cnt - 1) // 2] + xs[lo + cnt // 2])
        return np.array([_lr_center(xs[a:b], r, tol) for a, b in zip(lo, hi)])

    def power_sum(self, points: np.ndarray, r: float) -> float:
        """``sum_x min_a |x - a|**r`` for the Voronoi partition of ``points``."""
        cuts = self.cuts(points)
        lo, hi = cuts[:-1], cuts[1:]
        if r == 2:
            cnt = hi - lo
            a, b = self.s1[hi] - self.s1[lo], self.s2[hi] - self.s2[lo]
            return float(np.sum(np.maximum(b - 2 * points * a + points * points * cnt, 0.0)))
        if r == 1:
            m = np.clip(np.searchsorted(self.xs, points), lo, hi)
            below = points * (m - lo) - (self.s1[m] - self.s1[lo])
            above = (self.s1[hi] - self.s1[m]) - points * (hi - m)
            return float(np.sum(below + above))
        err = np.abs(self.xs - np.repeat(points, hi - lo))
        return float(np.sum(err**r))


def _lr_center(x: np.ndarray, r: float, tol: float) -> float:
    """Golden-section minimiser of ``sum |x - c|**r`` over ``c``."""
    a, b = float(x[0]), float(x[-1])
    if a == b:
        return a
    g = (math.sqrt(5) - 1) / 2

    def f(c):
        return float(np.sum(np.abs(x - c) ** r))

    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * max(1.0, abs(a), abs(b)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _repair(points: np.ndarray, cells: _SortedCells, N: int) -> np.ndarray:
    """Drop empty cells, then refill by splitting the widest occupied cell."""
    points = np.unique(points)
    while True:
        cuts = cells.cuts(points)
        occupied = cuts[1:] > cuts[:-1]
        if occupied.all() and points.size == N:
            return points
        points = points[occupied]
        if points.size < N:
            cuts = cells.cuts(points)
            lo, hi = cuts[:-1], cuts[1:]
            width = cells.xs[hi - 1] - cells.xs[lo]
            w = int(np.argmax(width))
            points = np.unique(np.append(points, 0.5 * (cells.xs[lo[w]] + cells.xs[hi[w] - 1])))


def train_lloyd(
    samples,
    N: int,
    r: float = 2.0,
    tol: float = 1e-10,
    max_iter: int = 20_000,
    history: list | None = None,
    allow_fewer: bool = False,
) -> Codebook1D:
    """Lloyd fixed point of the empirical law.

    Starts from the empirical quantiles at levels ``(2i - 1) / (2N)``.  Cell
    centres are means (``r = 2``), medians (``r = 1``) or golden-section
    minimisers otherwise.  If ``history`` is given, the empirical distortion
    after every iteration is appended to it.
    """
    if N < 1:
        raise ValueError(f"codebook size must be >= 1, got {N}")
    if r <= 0:
        raise ValueError(f"distortion exponent must be positive, got {r}")
    s = _as_samples(samples)
    xs = s.sorted_values
    n_distinct = int(np.count_nonzero(np.diff(xs))) + 1
    if n_distinct < N:
        if not allow_fewer:
            raise DegenerateSampleError(
                f"{n_distinct} distinct sample values cannot support {N} codepoints"
            )
        if history is not None:
            history.append(0.0)
        return Codebook1D(np.unique(xs), r)
    cells = _SortedCells(xs)
    levels = (2 * np.arange(1, N + 1) - 1) / (2 * N)
    points = _repair(np.quantile(xs, levels), cells, N)
    spread = max(1.0, float(xs[-1] - xs[0]))
    prev = cells.power_sum(points, r)
    if history is not None:
        history.append((prev / xs.size) ** (1 / r))
    for _ in range(max_iter):
        new = cells.centers(cells.cuts(points), r, tol)
        new = _repair(new, cells, N)
        cur = cells.power_sum(new, r)
        if cur > prev * (1 + 1e-9) + 1e-300:
            raise AssertionError(f"Lloyd distortion increased: {prev} -> {cur}")
        if history is not None:
            history.append((cur / xs.size) ** (1 / r))
        step = float(np.max(np.abs(new - points)))
        points, prev = new, cur
        if step <= tol * spread:
            break
    return Codebook1D(points, r)


# -- exact oracle -------------------------------------------------------------


def train_dp_oracle(samples, N: int, r: float = 2.0) -> Codebook1D:
    """Globally optimal codebook of the empirical law by interval DP.

    Uses the divide-and-conquer optimisation of the layer recursion, which is
    valid because the optimal split point is monotone for these costs.
    Restricted to ``r`` in ``{1, 2}``.
    """
    s = _as_samples(samples)
    if s.size > DP_MAX_SAMPLES:
        raise SizeGuardError(f"DP oracle limited to {DP_MAX_SAMPLES} samples, got {s.size}")
    if N > DP_MAX_SIZE:
        raise SizeGuardError(f"DP oracle limited to N <= {DP_MAX_SIZE}, got {N}")
    if r not in (1, 2):
        raise ValueError("DP oracle supports r in {1, 2} only")
    xs = s.sorted_values
    uniq = np.unique(xs)
    if uniq.size < N:
        raise DegenerateSampleError(f"{uniq.size} distinct sample values cannot support {N} codepoints")
    if uniq.size == N:
        return Codebook1D(uniq, r)
    shift = float(np.mean(xs))
    z = xs - shift
    n = z.size
    s1 = np.concatenate([[0.0], np.cumsum(z)])
    s2 = np.concatenate([[0.0], np.cumsum(z * z)])

    def cost(i, j):
        # cost of cell z[i:j]; i may be an array
        if r == 2:
            a = s1[j] - s1[i]
            return np.maximum(s2[j] - s2[i] - a * a / (j - i), 0.0)
        m = i + (j - i - 1) // 2
        c = z[m]
        return c * (m - i) - (s1[m] - s1[i]) + (s1[j] - s1[m]) - c * (j - m)

    inf = np.inf
    prev = np.full(n + 1, inf)
    prev[1:] = cost(np.zeros(n, dtype=np.intp), np.arange(1, n + 1))
    splits = []
    for k in range(2, N + 1):
        cur = np.full(n + 1, inf)
        arg = np.zeros(n + 1, dtype=np.intp)
        stack = [(k, n, k - 1, n - 1)]
        while stack:
            jlo, jhi, olo, ohi = stack.pop()
            if jlo > jhi:
                continue
            j = (jlo + jhi) // 2
            cand = np.arange(max(olo, k - 1), min(ohi, j - 1) + 1)
            vals = prev[cand] + cost(cand, j)
            b = int(np.argmin(vals))
            cur[j], arg[j] = vals[b], cand[b]
            stack.append((jlo, j - 1, olo, cand[b]))
            stack.append((j + 1, jhi, cand[b], ohi))
        splits.append(arg)
        prev = cur
    bounds = [n]
    j = n
    for arg in reversed(splits):
        j = int(arg[j])
        bounds.append(j)
    bounds.append(0)
    bounds = bounds[::-1]
    centers = []
    for i, j in zip(bounds[:-1], bounds[1:]):
        cell = xs[i:j]
        centers.append(float(np.mean(cell)) if r == 2 else float(np.median(cell)))
    return Codebook1D(np.unique(centers), r)


# -- Pierce curve -------------------------------------------------------------


def pierce_curve(sampler, r: float, delta: float, N_list, n_samples: int = 100_000, rng=0):
    """Train at each size and report rows ``(N, e_N, N * e_N)``.

    ``sampler(generator, size)`` draws from the law.  ``delta`` is the moment
    slack of the bound being probed; finiteness of the ``(r + delta)``-moment
    is the caller's business (see ``moment_norm``).
    """
    gen = as_factory(rng).generator("pierce")
    samples = SampleSet(sampler(gen, n_samples))
    rows = []
    for N in N_list:
        cb = train_lloyd(samples, int(N), r, allow_fewer=True)
        e = distortion(cb, samples, r)
        rows.append((int(N), e, int(N) * e))
    return np.array(rows)


def moment_norm(samples, q: float) -> float:
    """Empirical ``||X||_q``, the scale appearing in the Pierce bound."""
    v = _as_samples(samples).values
    return float(np.mean(np.abs(v) ** q) ** (1 / q))


def uniform_constant(r: float) -> float:
    """``lim N e_{N,r}`` for the uniform law on ``[0, 1]``: ``(1 / (2**r (r + 1)))**(1/r)``."""
    return (1.0 / (2**r * (r + 1))) ** (1 / r)


def zador_constant(pdf, r: float, support=(-np.inf, np.inf)) -> float:
    """``lim N e_{N,r} = uniform_constant(r) * (int g**(1/(1+r)))**((1+r)/r)`` by quadrature."""
    from scipy.integrate import quad

    s = 1.0 / (1.0 + r)
    integral, _ = quad(lambda x: pdf(x) ** s, *support, limit=200)
    return uniform_constant(r) * integral ** ((1 + r) / r)
