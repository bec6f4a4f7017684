"""
The two ends of the dial, plus a sanity inequality
==================================================

Scaling the Lipschitz constant L interpolates between the metric (small
L, value ~ L * W) and the unconstrained f-divergence (large L).  Push a
pair of measures through a noisy channel and the divergence can only
shrink.
"""

import numpy as np

from fgamma.functionals import FunctionClass
from fgamma.generators import make_kl
from fgamma.measures import DiscreteMeasure, StochasticKernel
from fgamma.solvers import (
    data_processing_check,
    f_divergence,
    gamma_ipm,
    limit_scan,
)

pts = np.array([[0.0], [1.0], [2.5]])
Q = DiscreteMeasure(pts, np.array([0.1, 0.4, 0.5]))
P = DiscreteMeasure(pts, np.array([0.6, 0.3, 0.1]))
gen = make_kl()
lip1 = FunctionClass.lipschitz(1.0)

scales = [1e-4, 1e-2, 0.1, 0.5, 1.0, 2.0, 10.0, 1e4]
scan = limit_scan(Q, P, gen, lip1, scales)

w = gamma_ipm(Q, P, lip1).value
df = f_divergence(Q, P, gen)
print(f"{'L':>10}  {'value':>12}  {'value/L':>12}")
for s, v in scan:
    print(f"{s:10.4g}  {v:12.8f}  {v / s:12.8f}")
print()
print(f"metric W(Q,P)      = {w:.8f}   (compare value/L at small L)")
print(f"f-divergence       = {df:.8f}   (compare value at large L)")

# a 3-state -> 2-state lumping channel
K = StochasticKernel(np.array([[1.0, 0.0],
                               [0.7, 0.3],
                               [0.0, 1.0]]),
                     np.array([[0.0], [2.0]]))
lhs, rhs, holds = data_processing_check(Q, P, gen, lip1, K)
print()
print(f"after channel: {lhs:.8f} <= before: {rhs:.8f}  ->  {holds}")
