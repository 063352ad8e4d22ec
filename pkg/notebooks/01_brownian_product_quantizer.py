"""
Quantizing Brownian paths in the Haar basis
===========================================

A product quantizer gives each Haar coefficient its own scalar codebook.
The budget N is split across coefficients by the allocation rule, and the
resulting error should decay like (log N)^(-1/2).
"""

import numpy as np

from haarquant import alloc, fquant, ratelab
from haarquant.haar import PathSample, TimeGrid
from haarquant.procsim import Brownian, simulate_paths

# How the budget is spread: a few large codebooks up front, then a tail of ones.
for N in (16, 256, 4096):
    plan = alloc.allocate_phi(alloc.power_weights(0.5), N)
    print(f"N={N:5d}  sizes={plan.sizes}")

# Train quantizers over a ladder of budgets and estimate L^2 errors.
budgets = [2**k for k in range(6, 13)]
curve, qs = fquant.distortion_curve(Brownian(), 0.5, 2.0, 2.0, budgets, 4000, rng=1, n_train=20_000, return_quantizers=True)
for c in curve:
    print(f"N={c.N:5d}  e={c.estimate:.4f} +- {c.stderr:.4f}")

fit = ratelab.fit_polylog(curve)
print(f"fitted exponent b = {fit.param:.3f} (theory 0.5), R2 = {fit.r2:.4f}")

# One path and its quantized version at the largest budget.
grid = TimeGrid(1.0, 8)
x = simulate_paths(Brownian(), grid, 1, rng=2)[0]
xq, codes = fquant.quantize_path(qs[-1], PathSample(grid, x))
print("codes:", codes)
print("pathwise L2 error:", float(np.sqrt(np.mean((x - xq.values)[:-1] ** 2))))
