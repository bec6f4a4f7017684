"""Duality, data-processing, and curvature checks."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from fgamma.errors import InputError
from fgamma.functionals import FunctionClass, lambda_f_weights
from fgamma.generators import from_name, make_alpha, make_kl
from fgamma.measures import DiscreteMeasure, StochasticKernel, joint_support
from fgamma.solvers import (
    data_processing_check,
    dual_check,
    f_gamma_divergence,
    hessian_check,
)


def meas(points, weights):
    return DiscreteMeasure(np.asarray(points, dtype=float),
                           np.asarray(weights, dtype=float))


def simplex_grid_conjugate(gen, P, g, gamma, step=1e-3):
    """Dense sweep of E_Q[g] - D(Q||P) over two-point probability
    vectors Q = (q, 1-q)."""
    best = -np.inf
    for q in np.arange(0.0, 1.0 + step, step):
        Q = meas(P.points, np.array([q, 1.0 - q]))
        val = float(np.array([q, 1.0 - q]) @ g) \
            - f_gamma_divergence(Q, P, gen, gamma).value
        best = max(best, val)
    return best


def test_dual_check_constant_g():
    p = meas([[0.0], [1.0], [2.0]], [0.3, 0.4, 0.3])
    gamma = FunctionClass.lipschitz(1.0)
    for name in ("kl", "alpha:2"):
        for c in (-0.7, 0.0, 1.2):
            lhs, rhs = dual_check(p, from_name(name), np.full(3, c), gamma)
            assert_allclose(rhs, c, atol=1e-9)
            assert_allclose(lhs, c, atol=1e-4)


def test_dual_check_two_point_matches_simplex_grid():
    gen = make_alpha(2.0)
    p = meas([[0.0], [1.0]], [0.6, 0.4])
    gamma = FunctionClass.lipschitz(1.0)
    g = np.array([0.0, 0.8])  # 0.8-Lipschitz on unit spacing
    oracle = simplex_grid_conjugate(gen, p, g, gamma)
    lhs, rhs = dual_check(p, gen, g, gamma)
    assert_allclose(lhs, oracle, atol=1e-4)
    assert_allclose(rhs, oracle, atol=1e-4)
    assert_allclose(lhs, rhs, atol=1e-4)
    # independent route to the rhs
    assert_allclose(rhs, lambda_f_weights(gen, p.weights, g)[0], atol=1e-12)


def test_dual_check_random_instances():
    rng = np.random.Generator(np.random.Philox(41))
    for i in range(4):
        n = int(rng.integers(2, 5))
        pts = np.sort(rng.uniform(0.0, 2.0, size=n))[:, None]
        p = meas(pts, rng.dirichlet(np.ones(n)))
        gamma = FunctionClass.lipschitz(1.0)
        # build a feasible g: scale a random profile inside the constraint
        raw = rng.normal(size=n)
        pw = np.abs(raw[:, None] - raw[None, :])
        dist = np.abs(pts - pts.T)
        np.fill_diagonal(dist, 1.0)
        lip = float(np.max(pw / dist))
        g = raw * (0.9 / max(lip, 1e-9))
        gen = from_name(["kl", "alpha:2", "alpha:1.5"][i % 3])
        lhs, rhs = dual_check(p, gen, g, gamma)
        assert_allclose(lhs, rhs, atol=1e-4)


def test_dual_check_rejects_infeasible_g():
    p = meas([[0.0], [1.0]], [0.5, 0.5])
    with pytest.raises(InputError):
        dual_check(p, make_kl(), np.array([0.0, 5.0]),
                   FunctionClass.lipschitz(1.0))


# ---------------------------------------------------------------------------
# data processing
# ---------------------------------------------------------------------------

def test_dpi_identity_kernel_is_equality():
    q = meas([[0.0], [1.0], [2.0]], [0.2, 0.5, 0.3])
    p = meas([[0.0], [1.0], [2.0]], [0.4, 0.3, 0.3])
    pts, _, _ = joint_support(q, p)
    K = StochasticKernel(np.eye(pts.shape[0]), pts)
    lhs, rhs, holds = data_processing_check(q, p, make_alpha(2.0),
                                            FunctionClass.lipschitz(1.0), K)
    assert holds
    assert_allclose(lhs, rhs, atol=1e-6)


def test_dpi_collapsing_kernel_zeroes_lhs():
    q = meas([[0.0], [1.0]], [0.2, 0.8])
    p = meas([[0.0], [1.0]], [0.7, 0.3])
    K = StochasticKernel(np.array([[1.0, 0.0], [1.0, 0.0]]),
                         np.array([[0.0], [5.0]]))
    lhs, rhs, holds = data_processing_check(q, p, make_kl(),
                                            FunctionClass.lipschitz(1.0), K)
    assert holds
    assert abs(lhs) <= 1e-9
    assert rhs >= -1e-10


def test_dpi_random_kernels():
    rng = np.random.Generator(np.random.Philox(43))
    for i in range(10):
        n = int(rng.integers(2, 5))
        pts = rng.normal(size=(n, 1))
        q = meas(pts, rng.dirichlet(np.ones(n)))
        p = meas(pts, rng.dirichlet(np.ones(n)))
        jp, _, _ = joint_support(q, p)
        m = int(rng.integers(2, 4))
        K = StochasticKernel(rng.dirichlet(np.ones(m), size=jp.shape[0]),
                             rng.normal(size=(m, 1)))
        gen = from_name(["kl", "alpha:2", "alpha:3"][i % 3])
        lhs, rhs, holds = data_processing_check(
            q, p, gen, FunctionClass.lipschitz(1.0), K)
        assert holds
        assert lhs <= rhs + 1e-8


def test_dpi_kernel_row_count_must_match():
    q = meas([[0.0], [1.0]], [0.5, 0.5])
    p = meas([[2.0]], [1.0])  # joint support has 3 points
    K = StochasticKernel(np.eye(2), np.array([[0.0], [1.0]]))
    with pytest.raises(InputError):
        data_processing_check(q, p, make_kl(),
                              FunctionClass.lipschitz(1.0), K)


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------

def test_hessian_constant_direction_is_degenerate_zero():
    q = meas([[0.0], [1.0]], [0.5, 0.5])
    p = meas([[0.0], [1.0]], [0.4, 0.6])
    chk = hessian_check(make_alpha(2.0), q, p,
                        np.array([0.1, -0.2]), np.ones(2), nu_aware=True)
    # variance of a constant under the reweighted measure is zero
    assert_allclose(chk.analytic, 0.0, atol=1e-12)
    assert_allclose(chk.numeric, 0.0, atol=1e-6)


def test_hessian_analytic_matches_numeric_f2():
    rng = np.random.Generator(np.random.Philox(44))
    q = meas([[0.0], [1.0], [2.0], [3.0]], [0.1, 0.4, 0.3, 0.2])
    p = meas([[0.0], [1.0], [2.0], [3.0]], [0.25, 0.25, 0.25, 0.25])
    for _ in range(5):
        g0 = rng.normal(0.0, 0.5, size=4)
        # keep one coordinate inside the curved branch of the conjugate
        # so the no-shift variant is not degenerate
        g0[0] = abs(g0[0]) + 0.3
        psi = rng.normal(0.0, 1.0, size=4)
        for nu_aware in (True, False):
            chk = hessian_check(make_alpha(2.0), q, p, g0, psi,
                                nu_aware=nu_aware)
            assert not chk.degenerate
            assert chk.analytic <= 1e-12  # concave objective
            assert_allclose(chk.numeric, chk.analytic,
                            rtol=1e-3, atol=1e-8)


def test_hessian_nu_aware_shift_invariance():
    q = meas([[0.0], [1.0]], [0.5, 0.5])
    p = meas([[0.0], [1.0]], [0.4, 0.6])
    g0 = np.array([0.3, -0.1])
    psi = np.array([1.0, -1.0])
    base = hessian_check(make_kl(), q, p, g0, psi, nu_aware=True)
    shifted = hessian_check(make_kl(), q, p, g0 + 2.5, psi, nu_aware=True)
    assert_allclose(shifted.analytic, base.analytic, atol=1e-10)
    assert_allclose(shifted.numeric, base.numeric, atol=1e-5)
    # adding a constant to the direction changes nothing either
    tilted = hessian_check(make_kl(), q, p, g0, psi + 3.0, nu_aware=True)
    assert_allclose(tilted.analytic, base.analytic, atol=1e-10)


def test_hessian_check_unpacks_as_pair():
    q = meas([[0.0], [1.0]], [0.5, 0.5])
    p = meas([[0.0], [1.0]], [0.4, 0.6])
    analytic, numeric = hessian_check(make_kl(), q, p,
                                      np.zeros(2), np.array([1.0, 0.0]))
    assert np.isfinite(analytic) and np.isfinite(numeric)
