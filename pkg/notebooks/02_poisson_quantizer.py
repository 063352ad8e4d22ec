"""
An explicit quantizer for the Poisson process
=============================================

Jump times are quantized one arrival at a time, with the horizon itself as a
"no jump" codepoint. The error falls much faster than any power of log N,
which is what separates jump processes from Brownian motion.
"""

import numpy as np

from haarquant import cppq, fquant, ratelab
from haarquant.procsim import Brownian, JumpLaw

budgets = [2**k for k in range(4, 15, 2)]
pois = cppq.cpp_distortion_curve(1.0, 1.0, None, 1.0, 1.0, 0.5, budgets, 5000, rng=3, n_train=20_000)
bm = fquant.distortion_curve(Brownian(), 0.5, 1.0, 1.0, budgets[2:], 3000, rng=3, n_train=20_000)

print("    N   poisson   brownian")
bm_at = {c.N: c.estimate for c in bm}
for c in pois:
    print(f"{c.N:5d}   {c.estimate:.4f}    {bm_at.get(c.N, np.nan):.4f}")

sub = ratelab.fit_subexp(pois)
print(f"exp(-c sqrt(log N loglog N)) fit: c = {sub.param:.3f}, R2 = {sub.r2:.4f}")

# Jump sizes get their own codebooks when the process is compound.
q = cppq.build_poisson_quantizer(2.0, 1.0, 2.0, 1.0, 0.5, 4096, JumpLaw("gaussian"), n_train=20_000, rng=4)
print(f"budget split N1={q.N1} (times), N2={q.N2} (sizes)")
print("first arrival codebook:", np.round(q.time_books[0].points, 3))
