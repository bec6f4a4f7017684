"""Command-line interface: output contracts, determinism, exit codes."""

import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

import fgamma.cli as cli
from fgamma.errors import SolverFailure
from fgamma.functionals import FunctionClass
from fgamma.generators import make_alpha
from fgamma.measures import DiscreteMeasure
from fgamma.propsuite import SuiteReport
from fgamma.solvers import infimal_convolution


def write_measure(path, points, weights):
    path.write_text(json.dumps({"points": points, "weights": weights}))
    return str(path)


def write_samples(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(len(rows[0]))])
        w.writerows(rows)
    return str(path)


@pytest.fixture
def pair(tmp_path):
    q = write_measure(tmp_path / "q.json",
                      [[0.0], [1.0], [2.0]], [0.2, 0.3, 0.5])
    p = write_measure(tmp_path / "p.json",
                      [[0.0], [1.0], [2.0]], [0.5, 0.3, 0.2])
    return q, p


def run_cli(capsys, argv):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def last_json(out):
    """Parse the JSON object that ends a (possibly tabular) stdout."""
    lines = out.splitlines()
    start = max(i for i, ln in enumerate(lines) if ln.startswith("{"))
    return json.loads("\n".join(lines[start:]))


# ---------------------------------------------------------------------------
# divergence
# ---------------------------------------------------------------------------

def test_divergence_equal_measures(tmp_path, capsys):
    q = write_measure(tmp_path / "q.json", [[0.0], [1.0]], [0.4, 0.6])
    code, out, _ = run_cli(capsys, [
        "divergence", "--q", q, "--p", q, "--f", "alpha:2",
        "--gamma", "lip", "--L", "1.0",
    ])
    assert code == 0
    result = json.loads(out)
    assert abs(result["value"]) <= 1e-9
    assert result["generator"] == "alpha:2"
    assert result["mode"] == "fgamma"


def test_divergence_deterministic_and_out_file(pair, tmp_path, capsys):
    q, p = pair
    out_file = tmp_path / "result.json"
    argv = ["divergence", "--q", q, "--p", p, "--f", "kl",
            "--gamma", "lip", "--L", "1.0", "--out", str(out_file)]
    code1, out1, _ = run_cli(capsys, argv)
    first = out_file.read_text()
    code2, out2, _ = run_cli(capsys, argv)
    assert code1 == code2 == 0
    assert out1 == out2
    assert first == out_file.read_text() == out1


def test_divergence_mode_all_is_a_sandwich(pair, capsys):
    q, p = pair
    code, out, _ = run_cli(capsys, [
        "divergence", "--q", q, "--p", p, "--f", "alpha:2",
        "--gamma", "lip", "--L", "1.0", "--mode", "all",
    ])
    assert code == 0
    result = json.loads(out)
    assert result["fgamma"] <= result["f_divergence"] + 1e-9
    assert result["fgamma"] <= result["ipm"] + 1e-9
    assert result["fgamma"] >= -1e-12


def test_divergence_mode_infconv_returns_intermediate(pair, capsys):
    q, p = pair
    code, out, _ = run_cli(capsys, [
        "divergence", "--q", q, "--p", p, "--f", "alpha:2",
        "--gamma", "lip", "--L", "0.5", "--mode", "infconv",
    ])
    assert code == 0
    result = json.loads(out)
    eta = result["eta_star"]
    assert math.isclose(sum(eta["weights"]), 1.0, abs_tol=1e-9)
    assert len(eta["points"]) == len(eta["weights"])


def test_divergence_bounded_gamma_requires_bound(pair, capsys):
    q, p = pair
    code, _, err = run_cli(capsys, [
        "divergence", "--q", q, "--p", p, "--gamma", "bounded",
    ])
    assert code == 2
    assert "bound" in json.loads(err)["error"]


def test_config_file_supplies_options_flags_win(pair, tmp_path, capsys):
    q, p = pair
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "q": q, "p": p, "f": "alpha:2", "gamma": "lip", "L": 1.0,
        "mode": "all",
    }))
    code, out, _ = run_cli(capsys, ["divergence", "--config", str(cfg),
                                    "--f", "kl"])
    assert code == 0
    result = json.loads(out)
    assert result["generator"] == "kl"   # flag beat the config
    assert result["mode"] == "all"       # config filled the gap


# ---------------------------------------------------------------------------
# error paths and exit codes
# ---------------------------------------------------------------------------

def test_missing_file_exits_2(tmp_path, capsys):
    code, _, err = run_cli(capsys, [
        "divergence", "--q", str(tmp_path / "nope.json"),
        "--p", str(tmp_path / "nope.json"),
    ])
    assert code == 2
    assert "error" in json.loads(err)


def test_missing_required_option_exits_2(capsys):
    code, _, err = run_cli(capsys, ["divergence"])
    assert code == 2
    assert "--q" in json.loads(err)["error"]


def test_unknown_generator_exits_2(pair, capsys):
    q, p = pair
    code, _, err = run_cli(capsys, [
        "divergence", "--q", q, "--p", p, "--f", "hellinger",
    ])
    assert code == 2
    assert "error" in json.loads(err)


def test_bad_usage_exits_2(capsys):
    assert cli.main([]) == 2
    assert cli.main(["no-such-command"]) == 2
    capsys.readouterr()


def test_solver_failure_exits_3(tmp_path, capsys, monkeypatch):
    s = write_samples(tmp_path / "s.csv", [[0.0], [1.0], [2.0]])

    def boom(qs, ps, config):
        raise SolverFailure("iterates diverge",
                            diagnostics={"objective": 1e12, "iteration": 7})

    monkeypatch.setattr(cli, "estimate", boom)
    code, _, err = run_cli(capsys, [
        "estimate", "--q-samples", s, "--p-samples", s,
    ])
    assert code == 3
    payload = json.loads(err)
    assert "diverge" in payload["error"]
    assert payload["diagnostics"]["iteration"] == 7


# ---------------------------------------------------------------------------
# dirac-figure
# ---------------------------------------------------------------------------

def test_dirac_figure_sweep(tmp_path, capsys):
    out_csv = tmp_path / "sweep.csv"
    code, out, _ = run_cli(capsys, [
        "dirac-figure", "--alphas", "2", "--x2-grid", "0.3,1.0,2.0",
        "--x3-ratios", "2.0", "--out", str(out_csv),
    ])
    assert code == 0
    info = json.loads(out)
    assert info["rows"] == 3 and info["failures"] == 0
    with open(out_csv) as fh:
        rows = list(csv.DictReader(fh))
    assert [r["status"] for r in rows] == ["ok"] * 3
    etas = [float(r["eta_x2_mass"]) for r in rows]
    assert all(1.0 / 3.0 - 1e-9 <= e <= 2.0 / 3.0 + 1e-9 for e in etas)
    # past the transition the intermediate measure stops moving mass
    big = [e for r, e in zip(rows, etas) if float(r["x2"]) == 2.0]
    assert big and abs(big[0] - 2.0 / 3.0) <= 1e-6
    # cross-check one row against the generic solver
    r0 = rows[0]
    sol = infimal_convolution(
        DiscreteMeasure(np.array([[0.0], [float(r0["x2"])],
                                  [float(r0["x3"])]]),
                        np.array([1, 1, 1]) / 3.0),
        DiscreteMeasure(np.array([[0.0], [float(r0["x2"])]]),
                        np.array([0.5, 0.5])),
        make_alpha(2.0), FunctionClass.lipschitz(1.0))
    assert abs(float(r0["value"]) - sol.value) <= 1e-5
    script = tmp_path / "sweep_plot.py"
    assert script.exists()
    compile(script.read_text(), str(script), "exec")


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------

def test_estimate_identical_samples(tmp_path, capsys):
    rng = np.random.Generator(np.random.Philox(2))
    s = write_samples(tmp_path / "s.csv",
                      rng.normal(0.0, 1.0, size=(50, 2)).tolist())
    code, out, _ = run_cli(capsys, [
        "estimate", "--q-samples", s, "--p-samples", s,
        "--n-features", "16", "--max-iters", "300", "--tol", "1e-6",
    ])
    assert code == 0
    result = json.loads(out)
    assert abs(result["value"]) <= 1e-6
    assert len(result["theta"]) == 16
    assert result["penalty"] == "one"


def test_estimate_deterministic_with_trace(tmp_path, capsys):
    rng = np.random.Generator(np.random.Philox(3))
    q = write_samples(tmp_path / "q.csv",
                      rng.normal(0.7, 1.0, size=(40, 1)).tolist())
    p = write_samples(tmp_path / "p.csv",
                      rng.normal(0.0, 1.0, size=(40, 1)).tolist())
    trace = tmp_path / "trace.csv"
    argv = ["estimate", "--q-samples", q, "--p-samples", p,
            "--n-features", "12", "--max-iters", "200", "--tol", "1e-6",
            "--seed", "4", "--trace", str(trace)]
    code1, out1, _ = run_cli(capsys, argv)
    first_trace = trace.read_text()
    code2, out2, _ = run_cli(capsys, argv)
    assert code1 == code2 == 0
    assert out1 == out2
    assert first_trace == trace.read_text()
    result = json.loads(out1)
    with open(trace) as fh:
        steps = list(csv.DictReader(fh))
    assert len(steps) == result["iterations"] + 1
    objs = [float(r["objective"]) for r in steps]
    assert objs[-1] == pytest.approx(result["value"])


def test_estimate_no_shift_kl_reports_log_mean_exp(tmp_path, capsys):
    rng = np.random.Generator(np.random.Philox(5))
    xq = rng.normal(0.5, 1.0, size=(30, 1))
    xp = rng.normal(0.0, 1.0, size=(30, 1))
    q = write_samples(tmp_path / "q.csv", xq.tolist())
    p = write_samples(tmp_path / "p.csv", xp.tolist())
    code, out, _ = run_cli(capsys, [
        "estimate", "--q-samples", q, "--p-samples", p, "--f", "kl",
        "--features", "poly", "--degree", "1", "--penalty", "none",
        "--theta-bound", "2.0", "--no-shift", "--tol", "1e-9",
    ])
    assert code == 0
    result = json.loads(out)
    assert result["nu"] == 0.0
    theta = float(result["theta"][0])
    manual = float(np.mean(theta * xq)) - math.log(
        float(np.mean(np.exp(theta * xp))))
    assert result["value"] == pytest.approx(manual, abs=1e-12)


def test_estimate_two_sided_penalty_is_charged(tmp_path, capsys):
    rng = np.random.Generator(np.random.Philox(6))
    q = write_samples(tmp_path / "q.csv",
                      rng.normal(1.0, 1.0, size=(40, 1)).tolist())
    p = write_samples(tmp_path / "p.csv",
                      rng.normal(0.0, 1.0, size=(40, 1)).tolist())
    base = ["estimate", "--q-samples", q, "--p-samples", p,
            "--n-features", "12", "--max-iters", "200", "--tol", "1e-6",
            "--lam", "5.0"]
    _, out_two, _ = run_cli(capsys, base + ["--penalty", "two"])
    _, out_one, _ = run_cli(capsys, base + ["--penalty", "one"])
    two = json.loads(out_two)
    one = json.loads(out_one)
    assert two["penalty_at_optimum"] > 0.0
    assert one["penalty_at_optimum"] >= 0.0
    # the two-sided form bites even where the slope is small
    assert two["penalty_at_optimum"] >= one["penalty_at_optimum"]


# ---------------------------------------------------------------------------
# proptest / limits / dpi
# ---------------------------------------------------------------------------

def test_proptest_table_and_report(capsys):
    code, out, _ = run_cli(capsys, [
        "proptest", "--suite", "sandwich", "--n", "3", "--seed", "5",
    ])
    assert code == 0
    assert "sandwich[0] pass" in out
    report = last_json(out)
    assert report["suite"] == "sandwich"
    assert report["passed"] is True
    assert report["failures"] == []


def test_proptest_failure_exits_1(capsys, monkeypatch):
    fake = SuiteReport(suite="sandwich", seed=0, n_instances=1,
                       records=[{"index": 0, "ok": False, "detail": "gap"}])
    monkeypatch.setattr(cli, "run_suite", lambda *a, **k: fake)
    code, out, _ = run_cli(capsys, ["proptest", "--suite", "sandwich"])
    assert code == 1
    assert "sandwich[0] FAIL" in out
    assert last_json(out)["passed"] is False


def test_proptest_unknown_suite_exits_2(capsys):
    code, _, err = run_cli(capsys, ["proptest", "--suite", "nope"])
    assert code == 2
    assert "nope" in json.loads(err)["error"]


def test_limits_scan_monotone(pair, capsys):
    q, p = pair
    code, out, _ = run_cli(capsys, [
        "limits", "--q", q, "--p", p, "--f", "alpha:2", "--L", "1.0",
        "--scales", "0.25,1,4,10000",
    ])
    assert code == 0
    result = json.loads(out)
    values = [v for _, v in result["scan"]]
    assert all(a <= b + 1e-10 for a, b in zip(values, values[1:]))
    assert values[-1] <= result["f_divergence"] + 1e-9
    assert math.isclose(values[-1], result["f_divergence"], rel_tol=1e-3)


def test_dpi_holds_on_a_kernel(pair, tmp_path, capsys):
    q, p = pair
    kernel = tmp_path / "k.json"
    kernel.write_text(json.dumps({
        "matrix": [[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]],
        "targets": [[0.0], [2.0]],
    }))
    code, out, _ = run_cli(capsys, [
        "dpi", "--q", q, "--p", p, "--f", "alpha:2", "--L", "1.0",
        "--kernel", str(kernel),
    ])
    assert code == 0
    result = json.loads(out)
    assert result["holds"] is True
    assert result["lhs"] <= result["rhs"] + 1e-8


def test_dpi_violation_exits_1(pair, tmp_path, capsys, monkeypatch):
    q, p = pair
    kernel = tmp_path / "k.json"
    kernel.write_text(json.dumps({
        "matrix": [[1.0], [1.0], [1.0]], "targets": [[0.0]],
    }))
    monkeypatch.setattr(cli, "data_processing_check",
                        lambda *a, **k: (1.0, 0.5, False))
    code, out, _ = run_cli(capsys, [
        "dpi", "--q", q, "--p", p, "--kernel", str(kernel),
    ])
    assert code == 1
    assert last_json(out)["holds"] is False


# ---------------------------------------------------------------------------
# console entry point
# ---------------------------------------------------------------------------

def test_module_entry_point(pair):
    q, p = pair
    proc = subprocess.run(
        [sys.executable, "-m", "fgamma.cli", "divergence", "--q", q,
         "--p", p, "--f", "kl", "--gamma", "lip", "--L", "1.0"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["value"] >= 0.0
