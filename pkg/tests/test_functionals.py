"""Variational functionals, penalties, and feature maps."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from fgamma.errors import InputError
from fgamma.functionals import (
    FeatureLinearFunction,
    FunctionClass,
    GradientFunction,
    PenaltySpec,
    gradient_penalty,
    grid_indicator_features,
    interpolation_points,
    lambda_f,
    lambda_f_weights,
    median_pairwise_distance,
    objective_H,
    objective_H_weights,
    polynomial_features,
    random_fourier_features,
)
from fgamma.generators import make_alpha, make_kl
from fgamma.measures import DiscreteMeasure


def grid_lambda(gen, p, g, lo=-10.0, hi=10.0, step=1e-5):
    """Dense nu-grid minimization of nu + sum_j p_j f*(g_j - nu)."""
    nus = np.arange(lo, hi + step, step)
    vals = nus + gen.f_star(np.asarray(g)[None, :] - nus[:, None]) @ p
    k = int(np.argmin(vals))
    return float(vals[k]), float(nus[k])


def uniform2():
    return DiscreteMeasure(np.array([[0.0], [1.0]]), np.array([0.5, 0.5]))


# grid_lambda(f2, (1/2,1/2), (0,1)) -> 0.6249999999999999 at nu=0.5
F2_LAMBDA_UNIFORM_01 = 0.625


def test_lambda_constant_is_identity():
    for gen in (make_kl(), make_alpha(2.0), make_alpha(0.5)):
        for c in (-2.0, 0.0, 1.3):
            val, nu = lambda_f(gen, uniform2(), np.array([c, c]))
            assert_allclose(val, c, atol=1e-9)


def test_lambda_f2_uniform_matches_nu_grid():
    gen = make_alpha(2.0)
    p = np.array([0.5, 0.5])
    g = np.array([0.0, 1.0])
    oracle, nu_oracle = grid_lambda(gen, p, g)
    assert_allclose(oracle, F2_LAMBDA_UNIFORM_01, atol=1e-6)
    val, nu = lambda_f_weights(gen, p, g)
    assert_allclose(val, oracle, atol=1e-6)
    assert_allclose(nu, nu_oracle, atol=1e-4)


def test_lambda_kl_is_log_mean_exp():
    rng = np.random.Generator(np.random.Philox(5))
    gen = make_kl()
    for _ in range(25):
        n = int(rng.integers(2, 7))
        p = rng.dirichlet(np.ones(n))
        g = rng.normal(0.0, 2.0, size=n)
        val, _ = lambda_f_weights(gen, p, g)
        assert_allclose(val, math.log(float(p @ np.exp(g))), atol=1e-8)


def test_lambda_shift_covariance():
    gen = make_alpha(1.5)
    p = np.array([0.3, 0.7])
    g = np.array([0.2, -0.4])
    base, _ = lambda_f_weights(gen, p, g)
    for c in (-1.0, 0.5, 3.0):
        shifted, _ = lambda_f_weights(gen, p, g + c)
        assert_allclose(shifted, base + c, atol=1e-9)


def test_lambda_convex_in_g():
    gen = make_alpha(2.0)
    rng = np.random.Generator(np.random.Philox(9))
    p = np.array([0.25, 0.5, 0.25])
    for _ in range(20):
        g0 = rng.normal(size=3)
        g1 = rng.normal(size=3)
        lo = lambda_f_weights(gen, p, 0.5 * (g0 + g1))[0]
        hi = 0.5 * (lambda_f_weights(gen, p, g0)[0]
                    + lambda_f_weights(gen, p, g1)[0])
        assert lo <= hi + 1e-9


def test_lambda_slab_unreachable():
    # fractional alpha: f* = +inf on [0, inf); large spread in g makes
    # every shift leave some argument in the infinite branch... but a
    # one-sided slab is always escapable by pushing nu up, so the value
    # stays finite; what must hold is nu > max(g).
    gen = make_alpha(0.5)
    p = np.array([0.5, 0.5])
    g = np.array([0.0, 5.0])
    val, nu = lambda_f_weights(gen, p, g)
    assert np.isfinite(val)
    assert nu > 5.0


def test_objective_zero_at_shifted_nu0():
    for gen in (make_kl(), make_alpha(2.0), make_alpha(3.0)):
        for nu in (-1.0, 0.0, 2.0):
            g = np.full(3, gen.nu0 + nu)
            val = objective_H_weights(
                gen, np.array([0.2, 0.3, 0.5]), np.array([0.5, 0.25, 0.25]),
                g, nu)
            assert_allclose(val, 0.0, atol=1e-12)


def test_objective_direct_evaluation():
    # f2: 0.7*1 - (0.5*f2*(1) + 0.5*f2*(0)) with f2*(1)=1, f2*(0)=1/2
    gen = make_alpha(2.0)
    val = objective_H_weights(gen, np.array([0.7, 0.3]),
                              np.array([0.5, 0.5]),
                              np.array([1.0, 0.0]), 0.0)
    assert_allclose(val, -0.05, atol=1e-15)


def test_objective_equal_measures_supremum_zero():
    # at Q = P the objective is <= 0 everywhere, = 0 at constant g
    gen = make_alpha(2.0)
    q = np.array([0.4, 0.6])
    rng = np.random.Generator(np.random.Philox(11))
    for _ in range(50):
        g = rng.normal(0.0, 2.0, size=2)
        nu = float(rng.normal())
        assert objective_H_weights(gen, q, q, g, nu) <= 1e-12
    assert_allclose(
        objective_H_weights(gen, q, q, np.zeros(2), -gen.nu0), 0.0,
        atol=1e-12)


def test_objective_infinite_star_is_minus_inf():
    gen = make_alpha(0.5)  # f* = +inf on [0, inf)
    val = objective_H_weights(gen, np.array([0.5, 0.5]),
                              np.array([0.5, 0.5]),
                              np.array([0.0, 1.0]), 0.0)
    assert val == -math.inf


def test_objective_measure_interface_uses_joint_support():
    gen = make_kl()
    q = DiscreteMeasure(np.array([[0.0], [1.0]]), np.array([0.5, 0.5]))
    p = DiscreteMeasure(np.array([[1.0], [2.0]]), np.array([0.5, 0.5]))
    # joint support is {0, 1, 2}
    val = objective_H(gen, q, p, np.array([0.3, 0.1, -0.2]), 0.0)
    expect = (0.5 * 0.3 + 0.5 * 0.1) - (
        0.5 * math.exp(0.1 - 1.0) + 0.5 * math.exp(-0.2 - 1.0))
    assert_allclose(val, expect, atol=1e-12)
    with pytest.raises(InputError):
        objective_H(gen, q, p, np.array([0.3, 0.1]), 0.0)


# ---------------------------------------------------------------------------
# Penalties
# ---------------------------------------------------------------------------

def test_penalty_pointwise_values():
    lam, L = 1.7, 2.0
    one = PenaltySpec(lam=lam, L=L, sided="one")
    two = PenaltySpec(lam=lam, L=L, sided="two")
    # constant function: gradient 0
    assert_allclose(one.apply(np.array([0.0])), [0.0])
    assert_allclose(two.apply(np.array([0.0])), [lam])
    # exactly L-Lipschitz slope
    assert_allclose(one.apply(np.array([L])), [0.0])
    assert_allclose(two.apply(np.array([L])), [0.0])
    # twice the slope
    assert_allclose(one.apply(np.array([2 * L])), [3 * lam])
    assert_allclose(two.apply(np.array([2 * L])), [lam])


def test_penalty_validation():
    with pytest.raises(InputError):
        PenaltySpec(lam=-1.0)
    with pytest.raises(InputError):
        PenaltySpec(sided="three")
    with pytest.raises(InputError):
        PenaltySpec(L=0.0)


def test_gradient_penalty_affine():
    # g(x) = s * x1 has constant gradient norm s everywhere
    lam, L = 1.0, 1.0
    qs = np.random.Generator(np.random.Philox(3)).normal(size=(40, 2))
    ps = qs + 1.0
    for s, expect_one, expect_two in ((0.5, 0.0, lam * 0.25),
                                      (1.0, 0.0, 0.0),
                                      (2.0, 3.0 * lam, lam)):
        gfun = GradientFunction(
            value=lambda x, s=s: s * x[:, 0],
            gradient=lambda x, s=s: np.column_stack(
                [np.full(x.shape[0], s), np.zeros(x.shape[0])]),
        )
        one = gradient_penalty(gfun, qs, ps, PenaltySpec(lam, L, "one"))
        two = gradient_penalty(gfun, qs, ps, PenaltySpec(lam, L, "two"))
        assert_allclose(one, expect_one, atol=1e-12)
        assert_allclose(two, expect_two, atol=1e-12)


def test_interpolation_points_deterministic_and_in_hull():
    qs = np.zeros((10, 2))
    ps = np.ones((7, 2))
    a = interpolation_points(qs, ps, 64, seed=12)
    b = interpolation_points(qs, ps, 64, seed=12)
    c = interpolation_points(qs, ps, 64, seed=13)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.all(a >= 0.0) and np.all(a <= 1.0)
    # each row lies on the segment between a Q point and a P point
    assert_allclose(a[:, 0], a[:, 1], atol=1e-12)


# ---------------------------------------------------------------------------
# Feature maps and function classes
# ---------------------------------------------------------------------------

def test_random_fourier_shapes_and_determinism():
    fm = random_fourier_features(3, n_features=16, bandwidth=2.0, seed=4)
    x = np.random.Generator(np.random.Philox(0)).normal(size=(5, 3))
    phi = fm.evaluate(x)
    jac = fm.jacobian(x)
    assert phi.shape == (5, 16)
    assert jac.shape == (5, 16, 3)
    fm2 = random_fourier_features(3, n_features=16, bandwidth=2.0, seed=4)
    assert_allclose(fm2.evaluate(x), phi)
    assert np.all(np.abs(phi) <= math.sqrt(2.0 / 16) + 1e-12)


def test_feature_jacobian_matches_finite_differences():
    for fm in (random_fourier_features(2, n_features=8, bandwidth=1.5, seed=1),
               polynomial_features(2, degree=3)):
        x = np.array([[0.3, -0.2], [1.1, 0.4]])
        jac = fm.jacobian(x)
        h = 1e-6
        for d in range(2):
            e = np.zeros(2)
            e[d] = h
            fd = (fm.evaluate(x + e) - fm.evaluate(x - e)) / (2 * h)
            assert_allclose(jac[:, :, d], fd, atol=1e-6)


def test_polynomial_features_span_monomials():
    # constant term omitted (the shift nu covers it); linear terms present
    fm = polynomial_features(2, degree=2)
    x = np.array([[2.0, 3.0]])
    phi = fm.evaluate(x)[0]
    assert 1.0 not in phi
    assert 2.0 in phi and 3.0 in phi
    assert 4.0 in phi and 9.0 in phi and 6.0 in phi  # x1^2, x2^2, x1*x2
    assert fm.n_features == 5


def test_grid_indicator_features():
    pts = np.array([[0.0], [1.0], [2.0]])
    fm = grid_indicator_features(pts)
    phi = fm.evaluate(np.array([[1.0], [0.0]]))
    assert_allclose(phi, [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
    assert fm.jacobian is None
    # off-grid points carry no features at all
    assert_allclose(fm.evaluate(np.array([[0.5]])), [[0.0, 0.0, 0.0]])


def test_feature_linear_function():
    fm = polynomial_features(1, degree=1)  # phi(x) = (x,)
    g = FeatureLinearFunction(fm, np.array([2.0]))
    x = np.array([[0.0], [1.0], [3.0]])
    assert_allclose(g(x), [0.0, 2.0, 6.0])
    assert_allclose(g.gradient(x)[:, 0], [2.0, 2.0, 2.0])
    with pytest.raises(InputError):
        FeatureLinearFunction(fm, np.zeros(3))


def test_median_pairwise_distance():
    x = np.array([[0.0], [1.0], [3.0]])
    # pairwise distances 1, 2, 3 -> median 2
    assert median_pairwise_distance(x) == pytest.approx(2.0)


def test_function_class_variants():
    lip = FunctionClass.lipschitz(2.0)
    assert lip.variant == "lipschitz"
    assert lip.shift_invariant()
    assert not FunctionClass.all_bounded(1.0).shift_invariant()
    half = lip.rescaled(0.5)
    assert half.L == pytest.approx(1.0)
    with pytest.raises(InputError):
        FunctionClass.lipschitz(-1.0)
    with pytest.raises(InputError):
        FunctionClass.all_bounded(0.0)


def test_function_class_violation():
    lip = FunctionClass.lipschitz(1.0)
    pts = np.array([[0.0], [1.0], [2.0]])
    assert lip.violation(pts, np.array([0.0, 1.0, 2.0])) <= 1e-12
    assert lip.violation(pts, np.array([0.0, 1.5, 2.0])) == pytest.approx(0.5)
    bdd = FunctionClass.all_bounded(1.0)
    assert bdd.violation(pts, np.array([0.0, -1.0, 1.0])) <= 1e-12
    assert bdd.violation(pts, np.array([0.0, -2.0, 1.0])) == pytest.approx(1.0)
