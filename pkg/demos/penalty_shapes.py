"""
Why the gradient penalty must be one-sided
==========================================

A two-sided penalty (charging |grad g| for being BELOW the target slope
as well as above it) looks symmetric and harmless.  It is not: the true
optimal witness here has slope 1/2 on half the domain, so the two-sided
form fines the exact optimizer while the one-sided form leaves it alone.
"""

from fgamma.estimators import penalty_counterexample
from fgamma.functionals import FunctionClass, PenaltySpec
from fgamma.generators import make_kl
from fgamma.measures import DiscreteMeasure
from fgamma.solvers import f_gamma_divergence
from fgamma.estimators import penalized_divergence

import numpy as np

for lam in (0.1, 1.0, 10.0):
    out = penalty_counterexample(lam=lam)
    print(f"lam={lam:5g}: one-sided penalty at optimum = "
          f"{out.one_sided_at_opt:g}, two-sided = {out.two_sided_at_opt:.4f}"
          f"  (max slope {out.grad_norm_max:.3f})")

print()

# soft vs hard constraint on an exact instance: the penalized value is
# bracketed by the constrained divergence and the unconstrained one
pts = np.array([[0.0], [0.7], [1.9]])
Q = DiscreteMeasure(pts, np.array([0.2, 0.3, 0.5]))
P = DiscreteMeasure(pts, np.array([0.6, 0.2, 0.2]))
gamma = FunctionClass.lipschitz(1.0)
hard = f_gamma_divergence(Q, P, make_kl(), gamma).value
print(f"hard-constrained value: {hard:.6f}")
for lam in (10.0, 1.0, 0.1):
    soft = penalized_divergence(Q, P, make_kl(), gamma,
                                penalty=PenaltySpec(lam=lam, L=1.0))
    print(f"lam={lam:5g}: penalized value {soft.value:.6f} "
          f"(leftover penalty {soft.diagnostics['penalty_at_solution']:.2e})")
