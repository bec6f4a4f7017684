"""Randomized invariant suites, one per structural property.

Shared by the ``proptest`` CLI subcommand and the test suite.  Every
suite draws its instances from a counter-based generator seeded by the
caller, so a failing record pins down an exact reproducible instance,
which is serialized into the report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from .errors import InputError
from .estimators import (
    bias_experiment,
    penalized_divergence,
    penalty_counterexample,
)
from .functionals import FunctionClass, PenaltySpec, objective_H
from .generators import from_name
from .measures import DiscreteMeasure, StochasticKernel, joint_support
from .solvers import (
    data_processing_check,
    dual_check,
    f_divergence,
    f_gamma_divergence,
    gamma_ipm,
    hessian_check,
    infimal_convolution,
    limit_scan,
)

__all__ = ["SuiteReport", "run_suite", "SUITE_NAMES"]

# generator pools: the infimal convolution needs a conjugate finite on
# all of R (admissible); the divergence property needs strict convexity
# on top of that; alpha < 1 only enters suites that go through the
# variational route directly
_DUAL_GENS = ("kl", "alpha:2", "alpha:1.5", "alpha:3", "alpha:0.5")
_ADMISSIBLE_GENS = ("kl", "alpha:2", "alpha:1.5", "alpha:3")
_NONNEG_DOMAIN_GENS = ("kl", "alpha:2", "alpha:3", "alpha:0.5")


@dataclass(frozen=True)
class SuiteReport:
    """Outcome of one invariant suite run."""

    suite: str
    seed: int
    n_instances: int
    records: List[dict]

    @property
    def failures(self) -> List[dict]:
        return [r for r in self.records if not r["ok"]]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json_dict(self) -> dict:
        return {
            "suite": self.suite,
            "seed": self.seed,
            "n_instances": self.n_instances,
            "n_checks": len(self.records),
            "passed": self.passed,
            "failures": self.failures,
        }


def _measure(rng, n: int, dim: int, spread: float = 1.0) -> DiscreteMeasure:
    return DiscreteMeasure(rng.normal(size=(n, dim)) * spread,
                           rng.dirichlet(np.ones(n)))


def _shared_pair(rng, n: int, dim: int):
    pts = rng.normal(size=(n, dim))
    return (DiscreteMeasure(pts, rng.dirichlet(np.ones(n))),
            DiscreteMeasure(pts, rng.dirichlet(np.ones(n))))


def _serialize(Q: DiscreteMeasure, P: DiscreteMeasure, gen_name: str,
               gamma: FunctionClass, **extra) -> dict:
    inst = {
        "q": Q.to_json_dict(),
        "p": P.to_json_dict(),
        "generator": gen_name,
        "gamma": {"variant": gamma.variant, "L": gamma.L,
                  "bound": gamma.bound},
    }
    inst.update(extra)
    return inst


def _record(records: list, index: int, ok: bool, detail: str,
            instance: dict) -> None:
    rec = {"index": index, "ok": bool(ok), "detail": detail}
    if not ok:
        rec["instance"] = instance
    records.append(rec)


# ---------------------------------------------------------------------------
# The suites
# ---------------------------------------------------------------------------

def _suite_sandwich(rng, n: int) -> List[dict]:
    """0 <= D^Gamma <= min(classical divergence, Gamma-IPM)."""
    records: List[dict] = []
    for i in range(n):
        dim = int(rng.integers(1, 4))
        gen_name = _DUAL_GENS[int(rng.integers(len(_DUAL_GENS)))]
        L = float([0.5, 1.0, 2.0][int(rng.integers(3))])
        if rng.random() < 0.4:
            Q, P = _shared_pair(rng, int(rng.integers(2, 7)), dim)
        else:
            Q = _measure(rng, int(rng.integers(2, 7)), dim)
            P = _measure(rng, int(rng.integers(2, 7)), dim)
        gen = from_name(gen_name)
        gamma = FunctionClass.lipschitz(L)
        d = f_gamma_divergence(Q, P, gen, gamma).value
        df = f_divergence(Q, P, gen)
        w = gamma_ipm(Q, P, gamma).value
        ok = d >= -1e-10 and d <= min(df, w) + 1e-8
        _record(records, i, ok,
                f"D={d:.6g} Df={df:.6g} ipm={w:.6g} gen={gen_name} L={L}",
                _serialize(Q, P, gen_name, gamma))
    return records


def _suite_divergence_property(rng, n: int) -> List[dict]:
    """D(Q||P) > 0 for Q != P and = 0 for Q = P (strictly admissible f)."""
    records: List[dict] = []
    gamma = FunctionClass.lipschitz(1.0)
    for i in range(n):
        dim = int(rng.integers(1, 3))
        gen_name = _ADMISSIBLE_GENS[int(rng.integers(len(_ADMISSIBLE_GENS)))]
        gen = from_name(gen_name)
        if rng.random() < 0.5:
            Q, P = _shared_pair(rng, int(rng.integers(2, 6)), dim)
            if np.max(np.abs(Q.weights - P.weights)) < 1e-3:
                continue  # too close to Q = P for the positivity check
        else:
            Q = _measure(rng, int(rng.integers(2, 6)), dim)
            P = _measure(rng, int(rng.integers(2, 6)), dim)
        d_neq = f_gamma_divergence(Q, P, gen, gamma).value
        d_eq = f_gamma_divergence(Q, Q, gen, gamma).value
        ok = d_neq > 1e-6 and abs(d_eq) <= 1e-9
        _record(records, i, ok,
                f"D(Q||P)={d_neq:.6g} D(Q||Q)={d_eq:.2e} gen={gen_name}",
                _serialize(Q, P, gen_name, gamma))
    return records


def _suite_infconv(rng, n: int) -> List[dict]:
    """Primal/dual equality plus the optimality structure of eta_star."""
    records: List[dict] = []
    for i in range(n):
        dim = int(rng.integers(1, 4))
        gen_name = _ADMISSIBLE_GENS[int(rng.integers(len(_ADMISSIBLE_GENS)))]
        gen = from_name(gen_name)
        L = float([0.5, 1.0, 2.0][int(rng.integers(3))])
        gamma = FunctionClass.lipschitz(L)
        Q = _measure(rng, int(rng.integers(2, 7)), dim)
        P = _measure(rng, int(rng.integers(2, 7)), dim)
        dual = f_gamma_divergence(Q, P, gen, gamma)
        pri = infimal_convolution(Q, P, gen, gamma)
        rel = abs(dual.value - pri.value) / max(1.0, abs(dual.value))
        eta = pri.eta_star
        cert = f_divergence(eta, P, gen) + gamma_ipm(Q, eta, gamma).value
        pts, qj, pj = joint_support(Q, P)
        live = pj > 0
        norm = float(pj[live] @ gen.f_star_prime(pri.g_star[live]
                                                 - pri.nu_star))
        h_gap = pri.value - objective_H(gen, Q, P, pri.g_star, pri.nu_star)
        w_qe = gamma_ipm(Q, eta, gamma).value
        ge = np.array([
            pri.g_star[int(np.argmin(np.max(np.abs(pts - y), axis=1)))]
            for y in eta.points
        ])
        span = abs((qj @ pri.g_star - eta.weights @ ge) - w_qe)
        mass_ok = (np.all(eta.weights >= 0)
                   and abs(eta.weights.sum() - 1.0) <= 1e-10)
        ok = (rel <= 1e-6 and abs(cert - pri.value) <= 1e-6
              and abs(norm - 1.0) <= 1e-6 and abs(h_gap) <= 1e-6
              and span <= 1e-6 and mass_ok)
        _record(records, i, ok,
                f"rel={rel:.2e} cert={abs(cert - pri.value):.2e} "
                f"norm={abs(norm - 1.0):.2e} H={abs(h_gap):.2e} "
                f"span={span:.2e} gen={gen_name} L={L}",
                _serialize(Q, P, gen_name, gamma))
    return records


def _suite_limits(rng, n: int) -> List[dict]:
    """Monotone L-scan recovering the classical divergence and the IPM."""
    records: List[dict] = []
    gamma = FunctionClass.lipschitz(1.0)
    for i in range(n):
        dim = int(rng.integers(1, 3))
        gen_name = _ADMISSIBLE_GENS[int(rng.integers(len(_ADMISSIBLE_GENS)))]
        gen = from_name(gen_name)
        Q, P = _shared_pair(rng, int(rng.integers(2, 6)), dim)
        scan = limit_scan(Q, P, gen, gamma, [0.25, 0.5, 1.0, 2.0, 4.0])
        vals = [v for _, v in scan]
        monotone = all(vals[j + 1] >= vals[j] - 1e-9
                       for j in range(len(vals) - 1))
        df = f_divergence(Q, P, gen)
        hi = limit_scan(Q, P, gen, gamma, [1e4])[0][1]
        w = gamma_ipm(Q, P, gamma).value
        lo = limit_scan(Q, P, gen, gamma, [1e-4])[0][1]
        hi_ok = abs(hi - df) <= 1e-3 * max(df, 1e-6)
        lo_ok = abs(lo / 1e-4 - w) <= 1e-3 * max(w, 1e-6)
        ok = monotone and hi_ok and lo_ok
        _record(records, i, ok,
                f"monotone={monotone} hi={hi:.6g} Df={df:.6g} "
                f"lo/d={lo / 1e-4:.6g} ipm={w:.6g} gen={gen_name}",
                _serialize(Q, P, gen_name, gamma))
    return records


def _suite_dual(rng, n: int) -> List[dict]:
    """Conjugate duality over the simplex: ascent value = lambda_f."""
    records: List[dict] = []
    gamma = FunctionClass.lipschitz(1.0)
    for i in range(n):
        dim = int(rng.integers(1, 3))
        gen_name = _NONNEG_DOMAIN_GENS[
            int(rng.integers(len(_NONNEG_DOMAIN_GENS)))]
        gen = from_name(gen_name)
        P = _measure(rng, int(rng.integers(2, 5)), dim)
        v = rng.normal(size=P.n)
        c = gamma.metric.pairwise(P.points)
        np.fill_diagonal(c, np.inf)
        lip = np.max(np.abs(v[:, None] - v[None, :]) / c)
        g = v * (0.9 / max(lip, 1e-12))
        lhs, rhs = dual_check(P, gen, g, gamma)
        ok = abs(lhs - rhs) <= 1e-4
        _record(records, i, ok,
                f"lhs={lhs:.8g} rhs={rhs:.8g} gap={abs(lhs - rhs):.2e} "
                f"gen={gen_name}",
                _serialize(P, P, gen_name, gamma,
                           g=[float(x) for x in g]))
    return records


def _suite_dpi(rng, n: int) -> List[dict]:
    """Data-processing inequality under random stochastic kernels."""
    records: List[dict] = []
    gamma = FunctionClass.lipschitz(1.0)
    for i in range(n):
        dim = int(rng.integers(1, 3))
        gen_name = _ADMISSIBLE_GENS[int(rng.integers(len(_ADMISSIBLE_GENS)))]
        gen = from_name(gen_name)
        Q = _measure(rng, int(rng.integers(2, 5)), dim)
        P = _measure(rng, int(rng.integers(2, 5)), dim)
        pts, _, _ = joint_support(Q, P)
        nsrc = pts.shape[0]
        kind = i % 3
        if kind == 0:
            targets = pts
            kmat = np.eye(nsrc)
        elif kind == 1:
            targets = rng.normal(size=(3, dim))
            kmat = np.tile(rng.dirichlet(np.ones(3)), (nsrc, 1))
        else:
            ntgt = int(rng.integers(2, 5))
            targets = rng.normal(size=(ntgt, dim))
            kmat = rng.dirichlet(np.ones(ntgt), size=nsrc)
        K = StochasticKernel(kmat, targets)
        lhs, rhs, holds = data_processing_check(Q, P, gen, gamma, K)
        ok = holds
        if kind == 0:
            ok = ok and abs(lhs - rhs) <= 1e-6
        if kind == 1:
            ok = ok and abs(lhs) <= 1e-9
        _record(records, i, ok,
                f"kind={('identity', 'collapsing', 'random')[kind]} "
                f"lhs={lhs:.6g} rhs={rhs:.6g} gen={gen_name}",
                _serialize(Q, P, gen_name, gamma,
                           kernel=[[float(x) for x in row] for row in kmat]))
    return records


def _suite_hessian(rng, n: int) -> List[dict]:
    """Analytic curvature along random directions vs finite differences."""
    records: List[dict] = []
    for i in range(n):
        dim = int(rng.integers(1, 3))
        nu_aware = i % 2 == 0
        pool = _DUAL_GENS if nu_aware else _ADMISSIBLE_GENS
        gen_name = pool[int(rng.integers(len(pool)))]
        gen = from_name(gen_name)
        Q = _measure(rng, int(rng.integers(2, 6)), dim)
        P = _measure(rng, int(rng.integers(2, 6)), dim)
        pts, _, _ = joint_support(Q, P)
        g0 = rng.normal(size=pts.shape[0]) * 0.7
        psi = rng.normal(size=pts.shape[0])
        chk = hessian_check(gen, Q, P, g0, psi, nu_aware=nu_aware)
        if chk.degenerate:
            _record(records, i, True, f"degenerate gen={gen_name}", {})
            continue
        rel = abs(chk.analytic - chk.numeric) / max(1.0, abs(chk.analytic))
        ok = rel <= 1e-3
        _record(records, i, ok,
                f"analytic={chk.analytic:.8g} numeric={chk.numeric:.8g} "
                f"rel={rel:.2e} nu_aware={nu_aware} gen={gen_name}",
                _serialize(Q, P, gen_name, FunctionClass.lipschitz(1.0),
                           g0=[float(x) for x in g0],
                           psi=[float(x) for x in psi]))
    return records


def _suite_bias(rng, n: int) -> List[dict]:
    """Plug-in estimates sit above the true value (2-sigma contract)."""
    records: List[dict] = []
    gamma = FunctionClass.lipschitz(1.0)
    for i in range(n):
        gen_name = ("kl", "alpha:2")[i % 2]
        gen = from_name(gen_name)
        pts = np.sort(rng.normal(size=(3, 1)), axis=0)
        Q = DiscreteMeasure(pts, rng.dirichlet(np.ones(3)))
        P = DiscreteMeasure(pts, rng.dirichlet(np.ones(3)))
        exp = bias_experiment(Q, P, gen, gamma, m=20, trials=60,
                              seed=int(rng.integers(2 ** 31)))
        ok = exp.upward_bias
        _record(records, i, ok,
                f"mean={exp.mean_estimate:.6g} true={exp.true_value:.6g} "
                f"se={exp.standard_error:.2e} gen={gen_name}",
                _serialize(Q, P, gen_name, gamma))
    return records


def _suite_penalty(rng, n: int) -> List[dict]:
    """One- vs two-sided penalties and the soft-constraint sandwich."""
    records: List[dict] = []
    for i in range(n):
        if i % 2 == 0:
            lam = float(rng.uniform(0.5, 5.0))
            ce = penalty_counterexample(lam=lam)
            ok = (ce.one_sided_at_opt == 0.0
                  and ce.two_sided_at_opt > 0.2 * lam * ce.interior_mass
                  and ce.grad_norm_max <= 0.5 + ce.grid_step)
            _record(records, i, ok,
                    f"lam={lam:.3g} one={ce.one_sided_at_opt} "
                    f"two={ce.two_sided_at_opt:.6g} "
                    f"gmax={ce.grad_norm_max:.6g}",
                    {"lam": lam})
            continue
        dim = int(rng.integers(1, 3))
        gen_name = _ADMISSIBLE_GENS[int(rng.integers(len(_ADMISSIBLE_GENS)))]
        gen = from_name(gen_name)
        gamma = FunctionClass.lipschitz(1.0)
        Q = _measure(rng, int(rng.integers(2, 5)), dim)
        P = _measure(rng, int(rng.integers(2, 5)), dim)
        lo = f_gamma_divergence(Q, P, gen, gamma).value
        hi = f_divergence(Q, P, gen)
        ok = True
        worst = ""
        for lam in (0.1, 1.0, 10.0):
            val = penalized_divergence(Q, P, gen, gamma,
                                       PenaltySpec(lam=lam, L=1.0)).value
            if not (lo - 1e-6 <= val <= hi + 1e-6):
                ok = False
                worst = f" FAIL lam={lam} val={val:.6g}"
        _record(records, i, ok,
                f"lo={lo:.6g} hi={hi:.6g} gen={gen_name}{worst}",
                _serialize(Q, P, gen_name, gamma))
    return records


SUITES: Dict[str, Callable] = {
    "sandwich": _suite_sandwich,
    "divergence-property": _suite_divergence_property,
    "infconv": _suite_infconv,
    "limits": _suite_limits,
    "dual": _suite_dual,
    "dpi": _suite_dpi,
    "hessian": _suite_hessian,
    "bias": _suite_bias,
    "penalty": _suite_penalty,
}

SUITE_NAMES = tuple(SUITES)


def run_suite(name: str, n_instances: int = 20, seed: int = 0) -> SuiteReport:
    """Run one named invariant suite on fresh random instances."""
    if name not in SUITES:
        raise InputError(
            f"unknown suite {name!r}; choose from {', '.join(SUITE_NAMES)}"
        )
    if n_instances < 1:
        raise InputError("n_instances must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    records = SUITES[name](rng, n_instances)
    return SuiteReport(suite=name, seed=seed, n_instances=n_instances,
                       records=records)
