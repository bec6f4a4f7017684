"""Closed-track solution of the two-atom / three-atom example.

P puts mass 1/2 on x1 = 0 and x2; Q puts mass 1/3 on each of 0, x2, x3.
Q is not absolutely continuous w.r.t. P, so the classical divergence is
infinite, but the Lipschitz-constrained divergence is finite and can be
reduced to two scalar root-finding problems for the power-family
generators with exponent alpha > 1:

1.  nu(g2) solves  (1/2) (f*)'(-nu) + (1/2) (f*)'(g2 - nu) = 1.
2.  The transition threshold gt solves (1/2) (f*)'(gt - nu(gt)) = 2/3.
3.  If x2 < gt the witness is g(x) = x on [0, x3] ("pre-transition":
    mass moves to x3 from both atoms of P).
4.  Otherwise g(x2) = gt and the intermediate measure saturates at
    mass 2/3 on x2 ("post-transition": all mass required at x3 is
    first redistributed onto x2).

The divergence value is the variational objective at the witness.
"""

from __future__ import annotations

import numpy as np

from ..errors import InputError, SolverFailure
from ..generators import make_alpha
from .types import DiracExampleSolution

__all__ = ["dirac_example"]


def _bisect(fun, lo: float, hi: float, increasing: bool, iters: int = 200):
    """Root of a monotone function on [lo, hi] with a verified sign change."""
    flo, fhi = fun(lo), fun(hi)
    if increasing:
        ok = flo <= 0.0 <= fhi
    else:
        ok = flo >= 0.0 >= fhi
    if not ok:
        raise SolverFailure(
            "no sign change on the bisection bracket",
            {"lo": lo, "hi": hi, "f_lo": flo, "f_hi": fhi},
        )
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        if (fm < 0.0) == increasing:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(lo), abs(hi)):
            break
    return 0.5 * (lo + hi)


def dirac_example(x2: float, x3: float, alpha: float) -> DiracExampleSolution:
    """Solve the worked example for given atom positions and exponent.

    ``g_star_2`` in the result is the transition threshold (the witness
    value at x2 in the saturated regime); ``eta_x2_mass`` is the mass of
    the intermediate measure at x2.
    """
    x2, x3, alpha = float(x2), float(x3), float(alpha)
    if not (0.0 < x2 < x3):
        raise InputError(f"need 0 < x2 < x3, got x2={x2}, x3={x3}")
    if not alpha > 1.0:
        raise InputError(f"need alpha > 1, got {alpha}")
    gen = make_alpha(alpha)
    fsp = gen.f_star_prime
    fst = gen.f_star

    def nu_of(g2: float) -> float:
        # normalization (1/2)(f*)'(-nu) + (1/2)(f*)'(g2 - nu) = 1,
        # left side nonincreasing in nu
        hi = max(abs(g2), 1.0)

        def h(nu):
            return 0.5 * float(fsp(-nu)) + 0.5 * float(fsp(g2 - nu)) - 1.0

        return _bisect(h, -hi - gen.nu0, hi - gen.nu0, increasing=False)

    def eta2_of(g2: float) -> float:
        return 0.5 * float(fsp(g2 - nu_of(g2)))

    # transition threshold: eta2(gt) = 2/3, eta2 increasing from 1/2 at 0
    hi = 1.0
    for _ in range(60):
        if eta2_of(hi) >= 2.0 / 3.0:
            break
        hi *= 2.0
        if hi > 1e6:
            raise SolverFailure(
                "transition threshold not bracketed below 1e6",
                {"alpha": alpha},
            )
    gt = _bisect(lambda g: eta2_of(g) - 2.0 / 3.0, 0.0, hi, increasing=True)

    if x2 < gt:
        regime = "pre-transition"
        g2_eff, g3_eff = x2, x3
    else:
        regime = "post-transition"
        g2_eff, g3_eff = gt, x3 - x2 + gt
    nu_star = nu_of(g2_eff)
    eta2 = 0.5 * float(fsp(g2_eff - nu_star))
    value = (g2_eff + g3_eff) / 3.0 - (
        nu_star + 0.5 * (float(fst(-nu_star)) + float(fst(g2_eff - nu_star)))
    )
    return DiracExampleSolution(
        eta_x2_mass=eta2,
        divergence_value=value,
        regime=regime,
        g_star_2=gt,
        nu_star=nu_star,
    )
