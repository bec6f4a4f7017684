"""Closed-track two-Dirac redistribution example.

The configuration is P = (delta_0 + delta_{x2})/2 against
Q = (delta_0 + delta_{x2} + delta_{x3})/3 with a unit-Lipschitz witness
class, solvable in closed form for the power generators.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from fgamma.errors import InputError
from fgamma.functionals import FunctionClass
from fgamma.generators import make_alpha
from fgamma.measures import DiscreteMeasure
from fgamma.solvers import dirac_example, infimal_convolution


def closed_form(x2, x3, alpha):
    """Independent closed-form solution.

    With (f_a*)'(y) = ((a-1)y)^(1/(a-1)) on y>0: the interior optimum of
    g(x2) makes the redistributed mass at x2 equal 2/3, which pins
    (f*)'(g2-nu) = 4/3 and, through the normalization
    (f*)'(-nu)/2 + (f*)'(g2-nu)/2 = 1, (f*)'(-nu) = 2/3.  Inverting
    gives the transition height g_t; below it the Lipschitz cap
    g2 = x2 binds instead and nu comes from the normalization at g2=x2.
    """
    am1 = alpha - 1.0
    g_t = ((4.0 / 3.0) ** am1 - (2.0 / 3.0) ** am1) / am1

    def fstar(y):
        y = np.asarray(y, dtype=float)
        out = np.full(y.shape, 1.0 / alpha / am1)
        pos = y > 0
        out[pos] += (am1 * y[pos]) ** (alpha / am1) / alpha
        return out

    def fstar_prime(y):
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape)
        pos = y > 0
        out[pos] = (am1 * y[pos]) ** (1.0 / am1)
        return out

    if x2 >= g_t:
        g2 = g_t
        nu = -((2.0 / 3.0) ** am1) / am1
        eta2 = 2.0 / 3.0
    else:
        g2 = x2
        lo, hi = -10.0 * (1 + x2), 10.0 * (1 + x2)
        for _ in range(200):
            nu = 0.5 * (lo + hi)
            ex = 0.5 * fstar_prime(np.array([-nu, g2 - nu])).sum()
            if ex > 1.0:
                lo, hi = nu, hi  # mass too large -> raise nu
                lo = nu
            else:
                hi = nu
        eta2 = 0.5 * float(fstar_prime(np.array([g2 - nu]))[0])
    # the witness climbs at unit slope from x2 to x3: g(x3) = g2 + x3 - x2
    value = (2.0 * g2 + x3 - x2) / 3.0 - nu - 0.5 * float(
        (fstar(np.array([-nu])) + fstar(np.array([g2 - nu])))[0])
    return value, eta2, nu, g_t


def test_closed_form_frozen_post_transition():
    # alpha=2, x2=1, x3=2: value 7/18, mass 2/3, nu -2/3, height 2/3
    value, eta2, nu, g_t = closed_form(1.0, 2.0, 2.0)
    assert_allclose(value, 7.0 / 18.0, atol=1e-12)
    assert_allclose(eta2, 2.0 / 3.0, atol=1e-12)
    assert_allclose(nu, -2.0 / 3.0, atol=1e-12)
    assert_allclose(g_t, 2.0 / 3.0, atol=1e-12)

    sol = dirac_example(1.0, 2.0, 2.0)
    assert sol.regime == "post-transition"
    assert_allclose(sol.divergence_value, 7.0 / 18.0, atol=1e-9)
    assert_allclose(sol.eta_x2_mass, 2.0 / 3.0, atol=1e-9)
    assert_allclose(sol.nu_star, -2.0 / 3.0, atol=1e-9)
    assert_allclose(sol.g_star_2, 2.0 / 3.0, atol=1e-9)


def test_closed_form_frozen_pre_transition():
    # alpha=2, x2=0.3 < 2/3: cap binds, nu=-0.85, mass 0.575, value 0.13875
    value, eta2, nu, _ = closed_form(0.3, 0.6, 2.0)
    assert_allclose(value, 0.13875, atol=1e-9)
    assert_allclose(eta2, 0.575, atol=1e-9)
    assert_allclose(nu, -0.85, atol=1e-9)

    sol = dirac_example(0.3, 0.6, 2.0)
    assert sol.regime == "pre-transition"
    assert_allclose(sol.divergence_value, 0.13875, atol=1e-9)
    assert_allclose(sol.eta_x2_mass, 0.575, atol=1e-9)
    assert_allclose(sol.nu_star, -0.85, atol=1e-9)


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0, 5.0])
def test_matches_closed_form_across_alphas(alpha):
    for x2 in (0.1, 0.4, 0.9, 1.6, 2.5):
        x3 = 2.0 * x2
        ref_value, ref_eta2, ref_nu, _ = closed_form(x2, x3, alpha)
        sol = dirac_example(x2, x3, alpha)
        assert_allclose(sol.divergence_value, ref_value, atol=1e-8)
        assert_allclose(sol.eta_x2_mass, ref_eta2, atol=1e-8)
        assert_allclose(sol.nu_star, ref_nu, atol=1e-8)


@pytest.mark.parametrize("alpha", [1.5, 2.0, 5.0])
def test_matches_generic_transport_solver(alpha):
    gamma = FunctionClass.lipschitz(1.0)
    gen = make_alpha(alpha)
    for x2, x3 in ((0.2, 0.5), (0.7, 1.4), (1.5, 3.0), (2.0, 2.2)):
        sol = dirac_example(x2, x3, alpha)
        Q = DiscreteMeasure(np.array([[0.0], [x2], [x3]]), np.full(3, 1 / 3))
        P = DiscreteMeasure(np.array([[0.0], [x2]]), np.array([0.5, 0.5]))
        generic = infimal_convolution(Q, P, gen, gamma)
        assert_allclose(sol.divergence_value, generic.value, atol=1e-5)
        # mass eta places at x2 (second column of the plan marginal)
        assert_allclose(sol.eta_x2_mass, generic.eta_star.weights[1],
                        atol=1e-5)


def test_mass_curve_monotone_with_plateau():
    alpha = 2.0
    x2s = np.linspace(0.05, 3.0, 40)
    masses = []
    for x2 in x2s:
        sol = dirac_example(float(x2), 2.0 * float(x2), alpha)
        masses.append(sol.eta_x2_mass)
        assert 1.0 / 3.0 - 1e-9 <= sol.eta_x2_mass <= 2.0 / 3.0 + 1e-9
        if sol.regime == "post-transition":
            assert_allclose(sol.eta_x2_mass, 2.0 / 3.0, atol=1e-6)
        else:
            assert sol.eta_x2_mass < 2.0 / 3.0
    diffs = np.diff(masses)
    assert np.all(diffs >= -1e-9)


def test_redistributed_mass_ignores_x3_location():
    # the mass moved to x2 depends on x2 only, not on how far x3 sits
    for x2 in (0.4, 1.2):
        base = dirac_example(x2, 2.0 * x2, 2.0).eta_x2_mass
        far = dirac_example(x2, 10.0 * x2, 2.0).eta_x2_mass
        assert_allclose(base, far, atol=1e-10)


def test_input_validation():
    with pytest.raises(InputError):
        dirac_example(-1.0, 2.0, 2.0)
    with pytest.raises(InputError):
        dirac_example(2.0, 1.0, 2.0)
    with pytest.raises(InputError):
        dirac_example(1.0, 2.0, 0.5)
