"""
Path regularity predicts the rate, except for jumps
===================================================

For continuous processes the exponent b of (E|X_t - X_s|^rho)^(1/rho) ~ h^b
matches the quantization rate (log N)^(-b). For Poisson paths the two part ways.
"""

from haarquant import ratelab
from haarquant.procsim import FBM, Brownian, Poisson

for name, spec, rho in [("brownian", Brownian(), 2.0), ("fbm H=0.3", FBM(H=0.3), 2.0), ("poisson", Poisson(lam=1.0), 1.0)]:
    est = ratelab.estimate_regularity(spec, rho, n_paths=1000, rng=5)
    print(f"{name:10s} regularity exponent {est.b:.3f} +- {est.half_width:.3f}")

budgets = [2**k for k in range(6, 13)]
rep = ratelab.regularity_rate_report(Brownian(), 2.0, 2.0, 2.0, budgets, rng=6, n_paths=3000, n_train=20_000, reg_paths=500)
print(ratelab.REPORT_HEADER)
print(rep.row())
rep = ratelab.regularity_rate_report(Poisson(lam=1.0), 1.0, 1.0, 1.0, [2**k for k in range(4, 17, 2)], rng=7, n_paths=3000, n_train=20_000, reg_paths=500)
print(rep.row())
