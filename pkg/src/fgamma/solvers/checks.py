"""Limit scans, duality, data-processing, and curvature diagnostics.

These routines exercise the structural identities the divergence family
satisfies: monotone limits toward the classical divergence and the
metric IPM, conjugate duality over the probability simplex, the
data-processing inequality under stochastic kernels, and concavity of
the variational objective along arbitrary directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InputError
from ..functionals import FunctionClass, lambda_f_weights
from ..generators import ConvexGenerator
from ..measures import DiscreteMeasure, StochasticKernel, joint_support
from .dual import _fss, f_gamma_divergence, gamma_constraints, maximize_variational

__all__ = [
    "limit_scan",
    "dual_check",
    "data_processing_check",
    "hessian_check",
    "HessianCheck",
]


def limit_scan(Q: DiscreteMeasure, P: DiscreteMeasure, gen: ConvexGenerator,
               gamma: FunctionClass, scales) -> list:
    """Divergence values for the class rescaled by each factor in
    ``scales`` (multiplying the Lipschitz constant).

    Large scales recover the classical divergence when Q << P; small
    scales recover ``scale * IPM`` to first order.
    """
    if gamma.variant != "lipschitz":
        raise InputError("limit scan needs a Lipschitz class")
    out = []
    for s in scales:
        if not s > 0:
            raise InputError(f"scales must be positive, got {s}")
        sol = f_gamma_divergence(Q, P, gen, gamma.rescaled(s))
        out.append((float(s), sol.value))
    return out


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.shape[0] + 1)
    cond = u - css / idx > 0
    rho = int(np.nonzero(cond)[0][-1])
    tau = css[rho] / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def dual_check(P: DiscreteMeasure, gen: ConvexGenerator, g,
               gamma: FunctionClass, max_iters: int = 400,
               gap_tol: float = 2e-6):
    """Conjugate-duality identity over the probability simplex.

    lhs = sup over probability vectors Q on supp(P) of
    {E_Q[g] - D(Q||P)}, computed by projected supergradient ascent with
    a Frank-Wolfe gap certificate; rhs is the shifted-conjugate
    functional of g.  The two agree (within ~1e-4) for generators with
    domain in [0, inf).
    """
    if gen.a < 0:
        raise InputError("duality check requires a generator domain in [0, inf)")
    g = np.asarray(g, dtype=float)
    if g.shape[0] != P.n:
        raise InputError(f"expected {P.n} values of g, got {g.shape[0]}")
    order = np.lexsort(P.points.T[::-1])
    pts = P.points[order]
    p = P.weights[order]
    gs = g[order]
    if gamma.violation(pts, gs) > 1e-8:
        raise InputError("g violates the function-class constraints")
    rhs, _ = lambda_f_weights(gen, p, gs)

    def J_and_grad(q):
        Qm = DiscreteMeasure(pts, q, is_probability=True)
        sol = f_gamma_divergence(Qm, P, gen, gamma)
        val = float(q @ gs) - sol.value
        grad = gs - (sol.g_star - sol.nu_star)
        return val, grad

    q = p.copy()
    val, grad = J_and_grad(q)
    best = val
    q_prev = grad_prev = None
    t = 1.0
    history = [val]
    for _ in range(max_iters):
        gap = float(np.max(grad) - grad @ q)
        if gap <= gap_tol:
            break
        # spectral (Barzilai-Borwein) step kills the face-to-face zigzag
        # of plain projected ascent; each trial costs a full inner solve
        if q_prev is not None:
            dq = q - q_prev
            dg = grad - grad_prev
            denom = -float(dq @ dg)  # >= 0 by concavity
            if denom > 1e-16:
                t = float(dq @ dq) / denom
            t = min(max(t, 1e-7), 1e3)
        ref = max(history[-5:])  # nonmonotone acceptance
        improved = False
        for _ in range(30):
            cand = _project_simplex(q + t * grad)
            move = float(grad @ (cand - q))
            cval, cgrad = J_and_grad(cand)
            if cval >= ref + 1e-6 * move - 1e-14:
                q_prev, grad_prev = q, grad
                q, val, grad = cand, cval, cgrad
                improved = True
                break
            t *= 0.5
        history.append(val)
        best = max(best, val)
        if not improved:
            break
    return best, rhs


def _merge_duplicate_targets(K: StochasticKernel):
    """Collapse duplicate target points by summing the kernel columns."""
    tgt = K.targets
    m = K.matrix
    keep: list[int] = []
    owner = np.empty(tgt.shape[0], dtype=int)
    for j in range(tgt.shape[0]):
        for k in keep:
            if np.max(np.abs(tgt[j] - tgt[k])) <= 1e-12:
                owner[j] = k
                break
        else:
            keep.append(j)
            owner[j] = j
    if len(keep) == tgt.shape[0]:
        return m, tgt
    cols = {k: i for i, k in enumerate(keep)}
    merged = np.zeros((m.shape[0], len(keep)))
    for j in range(tgt.shape[0]):
        merged[:, cols[owner[j]]] += m[:, j]
    return merged, tgt[keep]


def data_processing_check(Q: DiscreteMeasure, P: DiscreteMeasure,
                          gen: ConvexGenerator, gamma_on_target: FunctionClass,
                          K: StochasticKernel):
    """Data-processing inequality under a stochastic kernel.

    ``K`` maps the joint support of (Q, P) — rows in lexicographic
    order — onto its target points.  Returns (lhs, rhs, holds) where
    lhs is the divergence between the pushforward measures with the
    class on the target space, rhs maximizes the source objective over
    the kernel image of that class, and holds = (lhs <= rhs + 1e-8).
    """
    pts, q, p = joint_support(Q, P)
    if K.n_source != pts.shape[0]:
        raise InputError(
            f"kernel has {K.n_source} rows but the joint support has "
            f"{pts.shape[0]} points"
        )
    kmat, targets = _merge_duplicate_targets(K)

    KQ = DiscreteMeasure(targets, q @ kmat, is_probability=True)
    KP = DiscreteMeasure(targets, p @ kmat, is_probability=True)
    lhs = f_gamma_divergence(KQ, KP, gen, gamma_on_target).value

    live = p > 0
    A, b = gamma_constraints(gamma_on_target, targets)
    gauge = 0 if gamma_on_target.shift_invariant() else None
    _, _, rhs, _ = maximize_variational(
        gen, kmat.T @ q, p[live], kmat[live], A, b, gauge
    )
    holds = bool(lhs <= rhs + 1e-8)
    return lhs, rhs, holds


@dataclass(frozen=True)
class HessianCheck:
    """Analytic vs finite-difference curvature along one direction.

    ``degenerate`` flags a vanishing conjugate-curvature mass
    E_P[(f*)''], in which case the analytic formula is reported as zero
    but the comparison is not meaningful.
    """

    analytic: float
    numeric: float
    degenerate: bool = False

    def __iter__(self):
        return iter((self.analytic, self.numeric))


def hessian_check(gen: ConvexGenerator, Q: DiscreteMeasure, P: DiscreteMeasure,
                  g0, psi, nu_aware: bool = True,
                  step: float = 1e-4) -> HessianCheck:
    """Second derivative of the objective along eps -> g0 + eps*psi.

    With ``nu_aware`` the objective is E_Q[g] minus the
    shifted-conjugate functional (nu re-optimized at every eps), and the
    analytic value is -E_P[(f*)''(g0-nu)] * Var_{P0}[psi] under the
    reweighted measure dP0 proportional to (f*)''(g0-nu) dP.  Without
    it, the objective drops the shift entirely and the analytic value is
    -E_P[(f*)''(g0) psi^2].  Returns the pair plus a degeneracy flag.
    """
    pts, q, p = joint_support(Q, P)
    g0 = np.asarray(g0, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if g0.shape[0] != pts.shape[0] or psi.shape[0] != pts.shape[0]:
        raise InputError("g0 and psi must live on the joint support")
    live = p > 0
    pl = p[live]

    if nu_aware:
        def N(eps):
            val, _ = lambda_f_weights(gen, pl, (g0 + eps * psi)[live])
            if not math.isfinite(val):
                raise InputError("objective infinite at the evaluation point")
            return float(q @ (g0 + eps * psi)) - val

        _, nu0 = lambda_f_weights(gen, pl, g0[live])
        r = _fss(gen, g0[live] - nu0)
        w = pl * r
        W = float(np.sum(w))
        degenerate = not (W > 1e-12)
        if degenerate:
            analytic = 0.0
        else:
            w0 = w / W
            mean = float(w0 @ psi[live])
            var = float(w0 @ (psi[live] - mean) ** 2)
            analytic = -W * var
        numeric = (N(step) - 2.0 * N(0.0) + N(-step)) / (step * step)
    else:
        def S(eps):
            geps = g0 + eps * psi
            vals = np.asarray(gen.f_star(geps[live]), dtype=float)
            if np.any(np.isinf(vals)):
                raise InputError("objective infinite at the evaluation point")
            return float(q @ geps) - float(pl @ vals)

        r = _fss(gen, g0[live])
        analytic = -float(pl @ (r * psi[live] ** 2))
        degenerate = not (float(pl @ r) > 1e-12)
        numeric = (S(step) - 2.0 * S(0.0) + S(-step)) / (step * step)
    return HessianCheck(float(analytic), float(numeric), degenerate)
