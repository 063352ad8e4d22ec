"""Haar basis on [0, T], forward transform of grid paths and reconstruction.

Paths live on the dyadic grid ``{i T / 2**L}``.  Integrals use the
left-endpoint rule: ``values[i]`` stands for the path on the cell
``[t_i, t_{i+1})``.  Under that rule every Haar identity is exact for grid
paths, and the final grid value ``X(T)`` never enters an integral.

Coefficients use the flat index ``0`` then ``2**n + k`` (level ``n``,
position ``0 <= k < 2**n``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ResolutionError


@dataclass(frozen=True)
class TimeGrid:
    T: float
    levels: int

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError(f"horizon T must be positive, got {self.T}")
        if self.levels < 0:
            raise DomainError(f"levels must be >= 0, got {self.levels}")

    @property
    def n_cells(self) -> int:
        return 2**self.levels

    @property
    def h(self) -> float:
        return self.T / self.n_cells

    def times(self) -> np.ndarray:
        return np.arange(self.n_cells + 1) * self.h


@dataclass(frozen=True)
class PathSample:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_cells + 1,):
            raise ValueError(
                f"expected {self.grid.n_cells + 1} values for level {self.grid.levels}, "
                f"got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("path values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: TimeGrid, f) -> "PathSample":
        return cls(grid, np.asarray(f(grid.times()), dtype=float))


@dataclass(frozen=True)
class HaarCoeffTree:
    T: float
    max_level: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape != (2 ** (self.max_level + 1),):
            raise ValueError(
                f"tree of max level {self.max_level} needs {2 ** (self.max_level + 1)} "
                f"coefficients, got shape {coeffs.shape}"
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def level(self, n: int) -> np.ndarray:
        return self.coeffs[2**n : 2 ** (n + 1)]


def level_of(j: int) -> int:
    """Haar level of flat index ``j`` (index 0 is reported as level -1)."""
    return -1 if j == 0 else int(j).bit_length() - 1


def levels_for_depth(depth: int) -> int:
    """Smallest ``n_max`` whose tree holds flat indices ``0 .. depth - 1``."""
    return max(level_of(max(depth - 1, 0)), 0)


def haar_function(j: int, t, T: float = 1.0):
    """Evaluate the Haar function ``e_j`` at time(s) ``t``.

    Supports are half-open ``[a, b)``, except that ``t = T`` belongs to the
    last support at every level, so ``e_1(T) = -T**-0.5``.
    """
    if not T > 0:
        raise DomainError(f"horizon T must be positive, got {T}")
    if j < 0:
        raise DomainError(f"flat index must be >= 0, got {j}")
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr < 0) | (t_arr > T)):
        raise DomainError(f"t must lie in [0, {T}]")
    scale = T**-0.5
    if j == 0:
        out = np.full(t_arr.shape, scale)
    else:
        n = level_of(j)
        k = j - 2**n
        u = t_arr * 2**n / T - k
        at_end = (t_arr == T) & (k == 2**n - 1)
        pos = (u >= 0) & (u < 0.5)
        neg = ((u >= 0.5) & (u < 1)) | at_end
        out = 2 ** (n / 2) * scale * (pos.astype(float) - neg.astype(float))
    return float(out) if out.ndim == 0 else out


def _check_resolution(levels: int, n_max: int):
    if levels < n_max + 1:
        raise ResolutionError(
            f"grid level {levels} cannot resolve Haar level {n_max}; need >= {n_max + 1}"
        )


def forward_coeffs(values: np.ndarray, T: float, n_max: int) -> np.ndarray:
    """Haar coefficients of grid paths, batched over leading axes.

    ``values`` has shape ``(..., 2**L + 1)``; the result has shape
    ``(..., 2**(n_max + 1))``.
    """
    values = np.asarray(values, dtype=float)
    n_cells = values.shape[-1] - 1
    L = int(round(math.log2(n_cells))) if n_cells > 0 else -1
    if n_cells < 1 or 2**L != n_cells:
        raise ValueError(f"path length {values.shape[-1]} is not 2**L + 1")
    _check_resolution(L, n_max)
    h = T / n_cells
    lead = values.shape[:-1]
    # block integrals at level n_max + 1, then coarser by pairwise sums
    blocks = values[..., :-1].reshape(lead + (2 ** (n_max + 1), -1)).sum(axis=-1) * h
    out = np.empty(lead + (2 ** (n_max + 1),))
    scale = T**-0.5
    for n in range(n_max, -1, -1):
        left, right = blocks[..., 0::2], blocks[..., 1::2]
        out[..., 2**n : 2 ** (n + 1)] = 2 ** (n / 2) * scale * (left - right)
        blocks = left + right
    out[..., 0] = scale * blocks[..., 0]
    return out


def reconstruct_values(coeffs: np.ndarray, T: float, levels: int) -> np.ndarray:
    """Evaluate ``sum_j coeffs[j] e_j`` on the grid of the given level.

    ``coeffs`` has shape ``(..., 2**(n_max + 1))``; output ``(..., 2**levels + 1)``.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    size = coeffs.shape[-1]
    n_max = int(round(math.log2(size))) - 1
    if n_max < 0 or 2 ** (n_max + 1) != size:
        raise ValueError(f"coefficient count {size} is not a power of two >= 2")
    _check_resolution(levels, n_max)
    scale = T**-0.5
    cells = coeffs[..., :1] * scale
    for n in range(n_max + 1):
        d = coeffs[..., 2**n : 2 ** (n + 1)] * (2 ** (n / 2) * scale)
        cells = np.repeat(cells, 2, axis=-1)
        cells[..., 0::2] += d
        cells[..., 1::2] -= d
    cells = np.repeat(cells, 2 ** (levels - n_max - 1), axis=-1)
    return np.concatenate([cells, cells[..., -1:]], axis=-1)


def forward_transform(path: PathSample, n_max: int) -> HaarCoeffTree:
    if n_max < 0:
        raise DomainError(f"n_max must be >= 0, got {n_max}")
    _check_resolution(path.grid.levels, n_max)
    return HaarCoeffTree(path.grid.T, n_max, forward_coeffs(path.values, path.grid.T, n_max))


def reconstruct(tree: HaarCoeffTree, grid: TimeGrid) -> PathSample:
    if grid.T != tree.T:
        raise DomainError(f"grid horizon {grid.T} differs from tree horizon {tree.T}")
    return PathSample(grid, reconstruct_values(tree.coeffs, tree.T, grid.levels))


def grid_lp_norm(values: np.ndarray, T: float, p: float) -> np.ndarray:
    """``|f|_{L^p[0,T]}`` of grid paths by the left-endpoint rule (batched)."""
    values = np.asarray(values, dtype=float)
    cells = values[..., :-1]
    h = T / cells.shape[-1]
    if p == 2:
        s = np.einsum("...i,...i->...", cells, cells)
    elif p == 1:
        s = np.abs(cells).sum(axis=-1)
    else:
        s = (np.abs(cells) ** p).sum(axis=-1)
    return (h * s) ** (1.0 / p)


def level_norm_identity(tree: HaarCoeffTree, n: int, p: float, levels: int | None = None):
    """Both sides of the level-``n`` norm identity.

    Returns ``(direct, closed_form)``: the integral of ``|level-n partial sum|**p``
    over ``[0, T]`` by grid quadrature, and
    ``2**(n (p/2 - 1)) T**(1 - p/2) sum_k |coeff[2**n + k]|**p``.
    """
    if not 0 <= n <= tree.max_level:
        raise DomainError(f"level {n} outside 0..{tree.max_level}")
    if levels is None:
        levels = tree.max_level + 1
    only = np.zeros_like(tree.coeffs)
    only[2**n : 2 ** (n + 1)] = tree.level(n)
    partial = reconstruct_values(only, tree.T, levels)
    direct = grid_lp_norm(partial, tree.T, p) ** p
    closed = 2 ** (n * (p / 2 - 1)) * tree.T ** (1 - p / 2) * np.sum(np.abs(tree.level(n)) ** p)
    return float(direct), float(closed)
