"""Codebook-size allocation under a product budget.

Two weight families are handled:

* ``PhiWeights``: ``nu_k = Phi(1/k)`` with ``Phi(x) = x * phi(x)``, ``phi`` the
  mean-regularity modulus of the process.  Sizes are assigned to Haar flat
  indices ``0 .. m-1``.
* ``FactorialWeights``: ``a(x) = A**x / Gamma(x + 1)**(1 / mu_p)``, made
  non-increasing past its peak.  Sizes are assigned to jump indices ``1 .. m``.

All products are handled in log space.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .errors import BudgetError

LOG_SLACK = 1e-9


def _log_floor(x_log: float) -> int:
    """``floor(exp(x_log))`` robust to rounding just below an integer."""
    v = math.exp(x_log)
    f = math.floor(v)
    if v - f > 1 - 1e-9:
        f += 1
    return int(f)


@dataclass(frozen=True)
class PhiWeights:
    phi: Callable[[float], float]
    label: str = ""

    def nu(self, k: int) -> float:
        x = 1.0 / k
        return x * self.phi(x)

    def log_nu(self, k: int) -> float:
        return math.log(self.nu(k))

    def values(self, K: int) -> np.ndarray:
        return np.array([self.nu(k) for k in range(1, K + 1)])


def power_weights(b: float) -> PhiWeights:
    """Weights for ``phi(u) = u**b``, i.e. ``nu_k = k**-(b + 1)``."""
    if b < 0:
        raise ValueError("regularity exponent must be >= 0")
    return _PowerWeights(lambda u: u**b, f"phi(u)=u^{b:g}", b)


@dataclass(frozen=True)
class _PowerWeights(PhiWeights):
    b: float = 0.5

    def log_nu(self, k: int) -> float:
        return -(self.b + 1) * math.log(k)

    def nu(self, k: int) -> float:
        return math.exp(self.log_nu(k))

    def values(self, K: int) -> np.ndarray:
        return np.arange(1, K + 1, dtype=float) ** -(self.b + 1)


@dataclass(frozen=True)
class FactorialWeights:
    A: float
    mu_p: float

    def __post_init__(self):
        if not (self.A > 0 and self.mu_p > 0):
            raise ValueError("A and mu_p must be positive")

    def log_a(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x * math.log(self.A) - gammaln(x + 1) / self.mu_p

    @cached_property
    def peak(self) -> int:
        """Integer ``n >= 1`` where ``a(n)`` is largest (scan until it decreases)."""
        n = 1
        cur = float(self.log_a(1))
        while True:
            nxt = float(self.log_a(n + 1))
            if nxt < cur:
                return n
            n, cur = n + 1, nxt

    def log_values(self, K: int) -> np.ndarray:
        """``log a_0(n)`` for ``n = 1 .. K``: ``a`` frozen at its peak value before it."""
        n = np.arange(1, K + 1)
        return self.log_a(np.maximum(n, self.peak))

    def values(self, K: int) -> np.ndarray:
        return np.exp(self.log_values(K))


@dataclass(frozen=True)
class AllocationPlan:
    sizes: tuple[int, ...]
    N: int
    p: float = 1.0
    degenerate: bool = False

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if not sizes:
            raise ValueError("plan needs at least one size")
        if any(s < 1 for s in sizes):
            raise ValueError(f"sizes must be >= 1: {sizes}")
        if any(a < b for a, b in zip(sizes, sizes[1:])):
            raise ValueError(f"sizes must be non-increasing: {sizes}")
        if self.log_product > math.log(max(self.N, 1)) + LOG_SLACK:
            raise BudgetError(f"product of sizes {sizes} exceeds budget {self.N}")

    @property
    def depth(self) -> int:
        return len(self.sizes)

    @property
    def log_product(self) -> float:
        return math.fsum(math.log(s) for s in self.sizes)

    @property
    def product(self) -> int:
        return math.prod(self.sizes)


# -- regular-variation allocation --------------------------------------------


def _mstar_condition(log_N: float, log_nu: list[float], m: int) -> float:
    return log_N / m + log_nu[m - 1] - math.fsum(log_nu[:m]) / m


def depth_mstar(weights: PhiWeights, N: int) -> int:
    """Largest ``m`` with ``N**(1/m) nu_m (prod_{j<=m} nu_j)**(-1/m) >= 1``."""
    if N < 1:
        raise ValueError(f"budget must be >= 1, got {N}")
    if weights.nu(1) < 1.0 / N:
        warnings.warn(f"degenerate budget: nu_1 = {weights.nu(1):g} < 1/N", stacklevel=2)
    log_N = math.log(N)
    log_nu = [weights.log_nu(1)]
    m = 1
    # the condition is monotone in m for non-increasing weights
    while True:
        log_nu.append(weights.log_nu(m + 1))
        if _mstar_condition(log_N, log_nu, m + 1) < -1e-12:
            return m
        m += 1


def allocation_cost(plan: AllocationPlan, weights, tail_to: int) -> float:
    """``sum_{k<=m} nu_k / N_{k-1} + sum_{m<k<=K} nu_k``."""
    if tail_to < plan.depth:
        raise ValueError("tail_to must be >= plan depth")
    nu = weights.values(tail_to)
    head = nu[: plan.depth] / np.asarray(plan.sizes, dtype=float)
    return math.fsum(head) + math.fsum(nu[plan.depth :])


def _greedy_fill(sizes: list[int], nu_fn, N: int) -> list[int]:
    """Spend leftover budget: repeatedly apply the best single-slot increment."""
    log_N = math.log(N) + LOG_SLACK
    sizes = list(sizes)
    while True:
        log_prod = math.fsum(math.log(s) for s in sizes)
        best, best_gain = None, 0.0
        for i in range(len(sizes) + 1):
            cur = sizes[i] if i < len(sizes) else 1
            if i > 0 and cur + 1 > sizes[i - 1]:
                continue
            if log_prod + math.log((cur + 1) / cur) > log_N:
                continue
            gain = nu_fn(i + 1) * (1.0 / cur - 1.0 / (cur + 1))
            if gain > best_gain:
                best, best_gain = i, gain
        if best is None:
            return sizes
        if best == len(sizes):
            sizes.append(2)
        else:
            sizes[best] += 1


def allocate_phi(weights: PhiWeights, N: int, fill: bool = True) -> AllocationPlan:
    """Sizes ``N_{k-1} = [N**(1/m) nu_k (prod nu_j)**(-1/m)]`` at depth ``m*(N)``.

    With ``fill`` (default) any budget left over by the integer parts is spent
    greedily on the slot that most reduces the allocation cost.
    """
    m = depth_mstar(weights, N)
    log_nu = [weights.log_nu(k) for k in range(1, m + 1)]
    base = math.log(N) / m - math.fsum(log_nu) / m
    sizes = [max(1, _log_floor(base + ln)) for ln in log_nu]
    if fill:
        sizes = _greedy_fill(sizes, weights.nu, N)
    while len(sizes) > 1 and sizes[-1] == 1 and len(sizes) > m:
        sizes.pop()
    return AllocationPlan(tuple(sizes), N)


def brute_force_best(weights, N: int, tail_to: int) -> tuple[AllocationPlan, float]:
    """Exhaustive optimum over non-increasing integer plans with product <= N (tiny N)."""
    if N > 4096:
        raise ValueError("brute force is for tiny budgets only")
    nu = weights.values(tail_to)
    tail = np.concatenate([np.cumsum(nu[::-1])[::-1], [0.0]])
    best = [(1,), math.fsum(nu)]

    def rec(prefix, budget, head):
        depth = len(prefix)
        c = head + tail[depth]
        if c < best[1]:
            best[0], best[1] = tuple(prefix) or (1,), c
        cap = min(prefix[-1] if prefix else budget, budget)
        for v in range(2, cap + 1):
            rec(prefix + [v], budget // v, head + nu[depth] / v)

    rec([], N, 0.0)
    return AllocationPlan(best[0], N), best[1]


# -- factorial-weight allocation ---------------------------------------------


def factorial_depth(mu: float, N: int) -> int:
    """``ceil(2 sqrt(mu log N / log log N))``, floored at 1."""
    if N < 3:
        raise ValueError("depth formula needs N >= 3")
    lN = math.log(N)
    return max(1, math.ceil(2 * math.sqrt(mu * lN / math.log(lN))))


def allocate_factorial(weights: FactorialWeights, N: int, p: float = 1.0, mu: float | None = None) -> AllocationPlan:
    """Sizes ``N_n = [a_n**p N**(1/m) / (prod_{k<=m} a_k)**(p/m)]``, ``n = 1..m``.

    ``mu`` defaults to ``weights.mu_p / p``.  If the formula depth leaves some
    ``N_n < 1`` the depth is reduced until all sizes are >= 1, and the plan is
    flagged ``degenerate`` (routine at moderate budgets).  Budgets ``N < 3`` get the trivial plan.
    """
    if N < 1:
        raise ValueError(f"budget must be >= 1, got {N}")
    if N < 3:
        return AllocationPlan((N,) if N > 1 else (1,), N, p)
    mu = weights.mu_p / p if mu is None else mu
    m = factorial_depth(mu, N)
    log_N = math.log(N)
    degenerate = False
    while True:
        la = weights.log_values(m)
        base = log_N / m - p * math.fsum(la) / m
        sizes = [_log_floor(base + p * x) for x in la]
        if min(sizes) >= 1 or m == 1:
            break
        degenerate = True
        m -= 1
    return AllocationPlan(tuple(max(1, s) for s in sizes), N, p, degenerate)
