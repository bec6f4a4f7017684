"""Transport-form (primal) solver for the constrained divergence.

The divergence is the infimal convolution of the classical divergence
with the metric transport cost:

    inf over eta:  D_f(eta || P) + W(Q, eta)

On finite spaces the two stages can be merged into a single convex
program over a transport plan pi >= 0 with row marginal Q, columns
ranging over supp(P):

    minimize  sum_j p_j f(eta_j / p_j) + L * sum_ij pi_ij c(x_i, y_j)
    where     eta_j = sum_i pi_ij.

The program is solved by an equality-constrained interior-point Newton
method (log barrier on pi >= 0, KKT system for the row-sum equalities).
The intermediate measure eta_* is recovered as the column marginal, and
a dual witness g_star is reconstructed from the row multipliers by a
Lipschitz (min-form) extension onto the joint support.

This route shares no formulation, iteration scheme, or code path with
the variational solver, which is what makes agreement between the two a
meaningful check.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import InputError, SolverFailure
from ..functionals import FunctionClass, lambda_f_weights
from ..generators import ConvexGenerator
from ..measures import DiscreteMeasure, joint_support
from .types import DivergenceSolution

__all__ = ["infimal_convolution"]


def _fprime(gen: ConvexGenerator, x: np.ndarray) -> np.ndarray:
    if gen.f_prime is not None:
        return np.asarray(gen.f_prime(x), dtype=float)
    h = 1e-6 * np.maximum(1.0, np.abs(x))
    return (np.asarray(gen.f(x + h), dtype=float)
            - np.asarray(gen.f(x - h), dtype=float)) / (2.0 * h)


def _fsecond(gen: ConvexGenerator, x: np.ndarray) -> np.ndarray:
    if gen.f_second is not None:
        return np.asarray(gen.f_second(x), dtype=float)
    h = 1e-4 * np.maximum(1.0, np.abs(x))
    vals = (np.asarray(gen.f(x + h), dtype=float)
            - 2.0 * np.asarray(gen.f(x), dtype=float)
            + np.asarray(gen.f(x - h), dtype=float)) / (h * h)
    return np.maximum(vals, 0.0)


def _positions(haystack: np.ndarray, needles: np.ndarray) -> np.ndarray:
    """Index of each needle row in the haystack (rows unique, tol 1e-12)."""
    idx = np.empty(needles.shape[0], dtype=int)
    for i, x in enumerate(needles):
        d = np.max(np.abs(haystack - x), axis=1)
        j = int(np.argmin(d))
        if d[j] > 1e-9:
            raise InputError("point lookup failed on the joint support")
        idx[i] = j
    return idx


def infimal_convolution(
    Q: DiscreteMeasure,
    P: DiscreteMeasure,
    gen: ConvexGenerator,
    gamma: FunctionClass,
    init: str = "product",
    mu_final_rel: float = 1e-13,
) -> DivergenceSolution:
    """Two-stage decomposition solved as one transport program.

    Requires an admissible generator and a pure Lipschitz class (the
    transport cost is ``L * c``).  ``init`` selects the starting plan:
    "product" (outer product of the marginals) or "uniform" (Q-mass
    spread evenly over the columns); both lead to the same optimum for
    strictly convex generators.
    """
    if not gen.admissible:
        raise InputError(
            f"generator {gen.name} is not admissible; the decomposition "
            "requires a conjugate finite on all of R"
        )
    if gamma.variant != "lipschitz" or gamma.bound is not None:
        raise InputError("transport form needs a Lipschitz class without bound")
    if Q.dim != P.dim:
        raise InputError("dimension mismatch between the two measures")
    q = Q.weights
    p = P.weights
    nq, npts = q.shape[0], p.shape[0]
    L = gamma.L
    C = gamma.metric.cross(Q.points, P.points)

    if init == "product":
        pi = np.outer(q, p)
    elif init == "uniform":
        pi = np.outer(q, np.full(npts, 1.0 / npts))
    else:
        raise InputError(f"unknown init {init!r}")

    def objective(pi_flat):
        pi_m = pi_flat.reshape(nq, npts)
        eta = pi_m.sum(axis=0)
        ratio = eta / p
        vals = np.asarray(gen.f(ratio), dtype=float)
        if np.any(np.isinf(vals)):
            return math.inf
        return float(p @ vals + L * np.sum(pi_m * C))

    def grad_hess_data(pi_flat):
        pi_m = pi_flat.reshape(nq, npts)
        eta = pi_m.sum(axis=0)
        ratio = eta / p
        gcol = _fprime(gen, ratio)  # d/d eta_j of p_j f(eta_j/p_j)
        grad = (gcol[None, :] + L * C).reshape(-1)
        col_w = _fsecond(gen, ratio) / p  # per-column rank-one weight
        return grad, col_w

    x = pi.reshape(-1).copy()
    nvar = x.shape[0]
    f0 = objective(x)
    if not math.isfinite(f0):
        raise SolverFailure("infeasible starting plan", {"objective": f0})
    scale = max(1.0, abs(f0), float(L * np.max(C)) if C.size else 1.0)
    mu = 0.1 * scale
    mu_final = mu_final_rel * scale

    # equality rows: row sums of pi equal q
    total_newton = 0
    while True:
        for _ in range(120):
            grad, col_w = grad_hess_data(x)
            grad_mu = grad - mu / x
            # KKT system in (step, y): [H A^T; A 0], A = row-sum map
            H = np.zeros((nvar, nvar))
            for j in range(npts):
                idx = j + npts * np.arange(nq)
                H[np.ix_(idx, idx)] += col_w[j]
            H[np.diag_indices_from(H)] += mu / (x * x)
            K = np.zeros((nvar + nq, nvar + nq))
            K[:nvar, :nvar] = H
            for i in range(nq):
                cols = np.arange(i * npts, (i + 1) * npts)
                K[nvar + i, cols] = 1.0
                K[cols, nvar + i] = 1.0
            rhs = np.concatenate([-grad_mu, np.zeros(nq)])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                K[:nvar, :nvar] += 1e-12 * scale * np.eye(nvar)
                sol = np.linalg.solve(K, rhs)
            step = sol[:nvar]
            dec2 = float(-grad_mu @ step)
            # fraction-to-boundary: keep the plan strictly positive
            neg = step < 0
            t_max = 1.0
            if np.any(neg):
                t_max = min(1.0, float(0.99 * np.min(-x[neg] / step[neg])))
            phi0 = objective(x) - mu * float(np.sum(np.log(x)))
            t = t_max
            accepted = False
            for _ in range(60):
                cand = x + t * step
                if np.all(cand > 0):
                    phi = objective(cand) - mu * float(np.sum(np.log(cand)))
                    if math.isfinite(phi) and phi <= phi0 - 1e-4 * t * max(dec2, 0.0):
                        x = cand
                        accepted = True
                        break
                t *= 0.5
            total_newton += 1
            if not accepted or dec2 * 0.5 <= 0.1 * mu:
                break
        if mu <= mu_final:
            break
        mu = max(mu * 0.15, mu_final * 0.999)

    pi_m = x.reshape(nq, npts)
    eta = pi_m.sum(axis=0)
    value = objective(x)

    # row multipliers -> witness values on supp(Q) (up to the shift nu);
    # at the barrier optimum  f'(eta_j/p_j) + L C_ij - mu/pi_ij = lambda_i
    # for every j, but mu/pi is only well-conditioned on routes carrying
    # mass, so average T with the plan itself as weights
    T = _fprime(gen, eta / p)[None, :] + L * C - mu_final / pi_m
    lam = np.sum(pi_m * T, axis=1) / pi_m.sum(axis=1)
    pts, qj, pj = joint_support(Q, P)
    cross = gamma.metric.cross(pts, Q.points)
    # smallest L-Lipschitz extension of the multipliers: the objective
    # prefers g minimal off supp(Q), and active transport routes satisfy
    # g(x_i) - g(y_j) = L c_ij exactly
    g_star = np.max(lam[None, :] - L * cross, axis=1)
    g_star = g_star - g_star[0]
    p_idx = _positions(pts, P.points)
    lam_val, nu_star = lambda_f_weights(gen, p, g_star[p_idx])
    if not math.isfinite(lam_val):
        nu_star = 0.0

    row_resid = float(np.max(np.abs(pi_m.sum(axis=1) - q)))
    diag = {
        "iterations": total_newton,
        "final_constraint_violation": max(row_resid, max(0.0, float(-pi_m.min()))),
        "primal_dual_gap": float(mu_final * nvar),
    }
    eta_star = DiscreteMeasure(P.points, eta, is_probability=True)
    return DivergenceSolution(
        value=value,
        g_star=g_star,
        nu_star=float(nu_star),
        eta_star=eta_star,
        transport_plan=pi_m,
        diagnostics=diag,
    )
