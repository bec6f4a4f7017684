"""Command-line front end.

Subcommands: ``divergence`` (exact solvers on measure files),
``dirac-figure`` (the two-Dirac sweep as CSV plus a plot script),
``estimate`` (sample-based penalized estimation), ``proptest``
(randomized invariant suites), ``limits`` (Lipschitz-constant scan),
and ``dpi`` (data-processing inequality on a kernel file).

Every run is deterministic given ``--seed``; floats are serialized with
17 significant digits so repeated runs emit byte-identical output.
Exit codes: 0 success, 1 invariant violation, 2 bad input, 3 solver
failure (diagnostics as JSON on stderr).  A flat JSON config file can
supply any long option; explicit flags win.  ``FGAMMA_THREADS`` caps
the parallelism of batch sweeps.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import InputError, SolverFailure
from .estimators import (
    EstimatorConfig,
    estimate,
    load_samples,
    penalized_objective,
)
from .functionals import (
    FunctionClass,
    PenaltySpec,
    grid_indicator_features,
    median_pairwise_distance,
    polynomial_features,
    random_fourier_features,
)
from .generators import from_name
from .measures import load_kernel, load_measure
from .propsuite import SUITE_NAMES, run_suite
from .solvers import (
    data_processing_check,
    dirac_example,
    f_divergence,
    f_gamma_divergence,
    gamma_ipm,
    infimal_convolution,
    limit_scan,
)

__all__ = ["main"]


# ---------------------------------------------------------------------------
# Canonical JSON (17 significant digits, sorted keys)
# ---------------------------------------------------------------------------

def _json_render(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _json_render(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json_render(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        return "{" + ", ".join(
            json.dumps(str(k)) + ": " + _json_render(v) for k, v in items
        ) + "}"
    raise InputError(f"cannot serialize object of type {type(obj).__name__}")


def _emit(obj, out_path=None) -> None:
    text = _json_render(obj) + "\n"
    sys.stdout.write(text)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# Shared option plumbing
# ---------------------------------------------------------------------------

def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read config {path}: {e}") from None
    if not isinstance(cfg, dict):
        raise InputError("config file must hold one flat JSON object")
    return cfg


def _opt(args, cfg: dict, key: str, default=None):
    """CLI flag if given, else config value, else default."""
    val = getattr(args, key.replace("-", "_"), None)
    if val is not None:
        return val
    if key in cfg:
        return cfg[key]
    return default


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("FGAMMA_THREADS", "1")))
    except ValueError:
        return 1


def _gamma_from(args, cfg) -> FunctionClass:
    variant = _opt(args, cfg, "gamma", "lip")
    L = float(_opt(args, cfg, "L", 1.0))
    bound = _opt(args, cfg, "bound")
    if variant in ("lip", "lipschitz"):
        return FunctionClass.lipschitz(L, bound=(float(bound)
                                                 if bound is not None else None))
    if variant in ("bounded", "all-bounded"):
        if bound is None:
            raise InputError("--gamma bounded requires --bound")
        return FunctionClass.all_bounded(float(bound))
    raise InputError(f"unknown function class {variant!r}")


def _parse_floats(text: str):
    try:
        vals = [float(tok) for tok in str(text).split(",") if tok != ""]
    except ValueError:
        raise InputError(f"expected a comma-separated float list, got {text!r}")
    if not vals:
        raise InputError("empty float list")
    return vals


def _solution_dict(sol) -> dict:
    out = {
        "value": sol.value,
        "g_star": None if sol.g_star is None else sol.g_star,
        "nu_star": sol.nu_star,
        "eta_star": (None if sol.eta_star is None
                     else sol.eta_star.to_json_dict()),
        "diagnostics": sol.diagnostics,
    }
    if sol.transport_plan is not None:
        out["transport_plan"] = sol.transport_plan
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_divergence(args) -> int:
    cfg = _load_config(args.config)
    Q = load_measure(_req(args, cfg, "q"))
    P = load_measure(_req(args, cfg, "p"))
    gen = from_name(str(_opt(args, cfg, "f", "kl")))
    gamma = _gamma_from(args, cfg)
    mode = _opt(args, cfg, "mode", "fgamma")
    if mode == "fgamma":
        result = _solution_dict(f_gamma_divergence(Q, P, gen, gamma))
    elif mode == "infconv":
        result = _solution_dict(infimal_convolution(Q, P, gen, gamma))
    elif mode == "all":
        result = {
            "fgamma": f_gamma_divergence(Q, P, gen, gamma).value,
            "f_divergence": f_divergence(Q, P, gen),
            "ipm": gamma_ipm(Q, P, gamma).value,
        }
    else:
        raise InputError(f"unknown mode {mode!r} (fgamma | all | infconv)")
    result["generator"] = gen.name
    result["mode"] = mode
    _emit(result, _opt(args, cfg, "out"))
    return 0


def _req(args, cfg, key: str):
    val = _opt(args, cfg, key)
    if val is None:
        raise InputError(f"missing required option --{key}")
    return val


_PLOT_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Plot the two-Dirac sweep written by the divergence CLI.\"\"\"
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else {csv_name!r}
rows = [r for r in csv.DictReader(open(path)) if r["status"] == "ok"]
alphas = sorted({{float(r["alpha"]) for r in rows}})
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
for a in alphas:
    sel = sorted((float(r["x2"]), float(r["eta_x2_mass"]), float(r["value"]))
                 for r in rows if float(r["alpha"]) == a)
    xs = [s[0] for s in sel]
    ax1.plot(xs, [s[1] for s in sel], label=f"alpha={{a:g}}")
    ax2.plot(xs, [s[2] for s in sel], label=f"alpha={{a:g}}")
ax1.axhline(2.0 / 3.0, color="gray", lw=0.8, ls="--")
ax1.set_xlabel("x2"); ax1.set_ylabel("mass at x2"); ax1.legend()
ax2.set_xlabel("x2"); ax2.set_ylabel("divergence"); ax2.legend()
fig.tight_layout()
out = path.rsplit(".", 1)[0] + ".png"
fig.savefig(out, dpi=150)
print(out)
"""


def _cmd_dirac_figure(args) -> int:
    cfg = _load_config(args.config)
    out_path = _req(args, cfg, "out")
    alphas = _parse_floats(_opt(args, cfg, "alphas", "1.5,2,5"))
    ratios = _parse_floats(_opt(args, cfg, "x3-ratios", "2.0"))
    grid_spec = _opt(args, cfg, "x2-grid", "0.05:3.0:30")
    if isinstance(grid_spec, str) and ":" in grid_spec:
        lo, hi, count = grid_spec.split(":")
        x2s = np.linspace(float(lo), float(hi), int(count))
    else:
        x2s = np.asarray(_parse_floats(grid_spec))
    jobs = sorted(
        (a, float(x2), float(x2) * r) for a in alphas for x2 in x2s
        for r in ratios
    )

    def one(job):
        a, x2, x3 = job
        try:
            sol = dirac_example(x2, x3, a)
            return (a, x2, x3, sol.eta_x2_mass, sol.divergence_value, "ok")
        except (InputError, SolverFailure) as e:
            return (a, x2, x3, None, None, f"error: {e}")

    threads = _threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, jobs))
    else:
        rows = [one(j) for j in jobs]
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "x2", "x3", "eta_x2_mass", "value",
                         "status"])
        for a, x2, x3, eta, val, status in rows:
            writer.writerow([
                _fmt(a), _fmt(x2), _fmt(x3),
                "" if eta is None else _fmt(eta),
                "" if val is None else _fmt(val),
                status,
            ])
    script_path = _opt(args, cfg, "plot-script",
                       out_path.rsplit(".", 1)[0] + "_plot.py")
    with open(script_path, "w") as fh:
        fh.write(_PLOT_SCRIPT.format(csv_name=os.path.basename(out_path)))
    n_bad = sum(1 for r in rows if r[5] != "ok")
    _emit({"rows": len(rows), "failures": n_bad, "csv": out_path,
           "plot_script": script_path}, None)
    return 0


def _features_from(args, cfg, qs, ps):
    kind = _opt(args, cfg, "features", "rff")
    dim = qs.dim
    if kind == "rff":
        bandwidth = _opt(args, cfg, "bandwidth")
        if bandwidth is None:
            pooled = np.vstack([qs.samples, ps.samples])
            bandwidth = median_pairwise_distance(pooled)
        return random_fourier_features(
            dim, int(_opt(args, cfg, "n-features", 128)),
            float(bandwidth), int(_opt(args, cfg, "seed", 0)))
    if kind == "poly":
        return polynomial_features(dim, int(_opt(args, cfg, "degree", 3)))
    if kind == "grid":
        pooled = np.vstack([qs.samples, ps.samples])
        grid = np.unique(pooled, axis=0)
        return grid_indicator_features(grid)
    raise InputError(f"unknown feature family {kind!r} (rff | poly | grid)")


def _cmd_estimate(args) -> int:
    cfg = _load_config(args.config)
    qs = load_samples(_req(args, cfg, "q-samples"))
    ps = load_samples(_req(args, cfg, "p-samples"))
    gen = from_name(str(_opt(args, cfg, "f", "kl")))
    feats = _features_from(args, cfg, qs, ps)
    sided = _opt(args, cfg, "penalty", "one")
    if sided in ("none", "off"):
        penalty = None
    else:
        penalty = PenaltySpec(
            lam=float(_opt(args, cfg, "lam", 1.0)),
            L=float(_opt(args, cfg, "L", 1.0)),
            sided=str(sided),
            interpolation_count=int(_opt(args, cfg, "interp", 256)),
        )
    theta_bound = _opt(args, cfg, "theta-bound")
    config = EstimatorConfig(
        generator=gen,
        features=feats,
        penalty=penalty,
        step_size=float(_opt(args, cfg, "step", 0.25)),
        max_iters=int(_opt(args, cfg, "max-iters", 2000)),
        tol=float(_opt(args, cfg, "tol", 1e-8)),
        use_shift=not bool(_opt(args, cfg, "no-shift", False)),
        theta_bound=(float(theta_bound) if theta_bound is not None else None),
        seed=int(_opt(args, cfg, "seed", 0)),
    )
    res = estimate(qs, ps, config)
    penalty_at_opt = 0.0
    if penalty is not None:
        import dataclasses

        bare = dataclasses.replace(config, penalty=None)
        penalty_at_opt = (penalized_objective(qs, ps, bare, res.theta, res.nu)
                          - penalized_objective(qs, ps, config, res.theta,
                                                res.nu))
    trace_path = _opt(args, cfg, "trace")
    if trace_path:
        with open(trace_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "objective"])
            for i, v in enumerate(res.trace):
                writer.writerow([i, _fmt(v)])
    result = {
        "value": res.value,
        "nu": res.nu,
        "theta": res.theta,
        "converged": res.converged,
        "iterations": res.iterations,
        "penalty": sided,
        "penalty_at_optimum": penalty_at_opt,
        "generator": gen.name,
        "trace_path": trace_path,
    }
    _emit(result, _opt(args, cfg, "out"))
    return 0


def _cmd_proptest(args) -> int:
    cfg = _load_config(args.config)
    suite = _req(args, cfg, "suite")
    n = int(_opt(args, cfg, "n", 20))
    seed = int(_opt(args, cfg, "seed", 0))
    report = run_suite(suite, n_instances=n, seed=seed)
    for rec in report.records:
        mark = "pass" if rec["ok"] else "FAIL"
        sys.stdout.write(f"{suite}[{rec['index']}] {mark}  {rec['detail']}\n")
    _emit(report.to_json_dict(), _opt(args, cfg, "out"))
    return 0 if report.passed else 1


def _cmd_limits(args) -> int:
    cfg = _load_config(args.config)
    Q = load_measure(_req(args, cfg, "q"))
    P = load_measure(_req(args, cfg, "p"))
    gen = from_name(str(_opt(args, cfg, "f", "kl")))
    gamma = FunctionClass.lipschitz(float(_opt(args, cfg, "L", 1.0)))
    scales = _parse_floats(_opt(args, cfg, "scales",
                                "0.0001,0.25,0.5,1,2,4,10000"))
    scan = limit_scan(Q, P, gen, gamma, scales)
    result = {
        "scan": [[s, v] for s, v in scan],
        "f_divergence": f_divergence(Q, P, gen),
        "ipm": gamma_ipm(Q, P, gamma).value,
        "generator": gen.name,
    }
    _emit(result, _opt(args, cfg, "out"))
    return 0


def _cmd_dpi(args) -> int:
    cfg = _load_config(args.config)
    Q = load_measure(_req(args, cfg, "q"))
    P = load_measure(_req(args, cfg, "p"))
    gen = from_name(str(_opt(args, cfg, "f", "kl")))
    gamma = FunctionClass.lipschitz(float(_opt(args, cfg, "L", 1.0)))
    K = load_kernel(_req(args, cfg, "kernel"))
    lhs, rhs, holds = data_processing_check(Q, P, gen, gamma, K)
    _emit({"lhs": lhs, "rhs": rhs, "holds": holds,
           "generator": gen.name}, _opt(args, cfg, "out"))
    return 0 if holds else 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fgamma",
        description="Divergences interpolating f-divergences and "
                    "Lipschitz integral probability metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat JSON config file; flags win")
        p.add_argument("--out", help="also write the JSON result here")
        p.add_argument("--seed", type=int, help="RNG seed (default 0)")

    p = sub.add_parser("divergence", help="exact divergences between "
                                          "two measure files")
    common(p)
    p.add_argument("--q", help="measure file (.json or .csv)")
    p.add_argument("--p", help="measure file (.json or .csv)")
    p.add_argument("--f", help="generator: kl | chi2 | alpha:<a>")
    p.add_argument("--gamma", help="function class: lip | bounded")
    p.add_argument("--L", type=float, help="Lipschitz constant")
    p.add_argument("--bound", type=float, help="uniform bound")
    p.add_argument("--mode", help="fgamma | all | infconv")
    p.set_defaults(func=_cmd_divergence)

    p = sub.add_parser("dirac-figure", help="two-Dirac sweep CSV and "
                                            "plot script")
    common(p)
    p.add_argument("--alphas", help="comma list (default 1.5,2,5)")
    p.add_argument("--x2-grid", help="lo:hi:count or comma list")
    p.add_argument("--x3-ratios", help="x3 = ratio * x2 (default 2.0)")
    p.add_argument("--plot-script", help="plot script path")
    p.set_defaults(func=_cmd_dirac_figure)

    p = sub.add_parser("estimate", help="penalized estimation from "
                                        "sample CSVs")
    common(p)
    p.add_argument("--q-samples", help="CSV, one sample per row")
    p.add_argument("--p-samples", help="CSV, one sample per row")
    p.add_argument("--f", help="generator: kl | chi2 | alpha:<a>")
    p.add_argument("--features", help="rff | poly | grid")
    p.add_argument("--n-features", type=int, help="feature count (rff)")
    p.add_argument("--bandwidth", type=float, help="rff bandwidth "
                                                   "(default: median heuristic)")
    p.add_argument("--degree", type=int, help="polynomial degree")
    p.add_argument("--penalty", help="one | two | none")
    p.add_argument("--lam", type=float, help="penalty strength")
    p.add_argument("--L", type=float, help="penalty Lipschitz target")
    p.add_argument("--interp", type=int, help="penalty interpolation points")
    p.add_argument("--step", type=float, help="ascent step size")
    p.add_argument("--max-iters", type=int, help="iteration budget")
    p.add_argument("--tol", type=float, help="first-order tolerance")
    p.add_argument("--theta-bound", type=float, help="parameter box bound")
    p.add_argument("--no-shift", action="store_const", const=True,
                   help="drop the shift (KL: cumulant form)")
    p.add_argument("--trace", help="write per-iteration objective CSV here")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("proptest", help="randomized invariant suites")
    common(p)
    p.add_argument("--suite", help=" | ".join(SUITE_NAMES))
    p.add_argument("--n", type=int, help="instances (default 20)")
    p.set_defaults(func=_cmd_proptest)

    p = sub.add_parser("limits", help="Lipschitz-constant scan")
    common(p)
    p.add_argument("--q", help="measure file")
    p.add_argument("--p", help="measure file")
    p.add_argument("--f", help="generator")
    p.add_argument("--L", type=float, help="base Lipschitz constant")
    p.add_argument("--scales", help="comma list of scale factors")
    p.set_defaults(func=_cmd_limits)

    p = sub.add_parser("dpi", help="data-processing inequality check")
    common(p)
    p.add_argument("--q", help="measure file")
    p.add_argument("--p", help="measure file")
    p.add_argument("--f", help="generator")
    p.add_argument("--L", type=float, help="Lipschitz constant")
    p.add_argument("--kernel", help="kernel JSON file")
    p.set_defaults(func=_cmd_dpi)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad usage, which matches the input-error code
        return int(e.code) if e.code else 0
    try:
        return args.func(args)
    except InputError as e:
        sys.stderr.write(_json_render({"error": str(e)}) + "\n")
        return 2
    except SolverFailure as e:
        sys.stderr.write(_json_render(
            {"error": str(e), "diagnostics": e.diagnostics}) + "\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
