"""Acceptance criteria 1-10, driven through the ``pong validate`` command.

The full suite runs once as a subprocess; criteria 1-9 read its report and
the per-check wall times it prints on stderr.  Criterion 10 runs the command
a second time and compares the two reports byte for byte.  One summary line
per criterion is printed (and collected into the pytest terminal summary).
"""

import json
import re
import subprocess
import sys

import pytest

from conftest import ACCEPTANCE_LINES

SEED = 20240
TIME_LIMITS = {"rectangle_oracle": 5.0, "polygon_monte_carlo": 120.0, "bound_soundness": 600.0}


def _validate(out):
    proc = subprocess.run(
        [sys.executable, "-m", "pong.cli", "validate", "--seed", str(SEED), "--out", str(out)],
        capture_output=True,
        text=True,
    )
    seconds = {m[2]: float(m[3]) for m in re.finditer(r"^(PASS|FAIL) (\S+) ([0-9.]+)s$", proc.stderr, re.M)}
    return proc, seconds


@pytest.fixture(scope="module")
def first_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("validate") / "report.json"
    proc, seconds = _validate(out)
    assert out.exists(), proc.stderr
    report = json.loads(out.read_text())
    return {"proc": proc, "path": out, "checks": {c["name"]: c for c in report["checks"]}, "seconds": seconds}


def _record(n, ok, text):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {text}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def _criterion(first_run, n, name, summary):
    c = first_run["checks"][name]
    sec = first_run["seconds"].get(name, float("nan"))
    limit = TIME_LIMITS.get(name)
    timed_ok = limit is None or sec < limit
    budget = f", {sec:.1f}s < {limit:.0f}s" if limit else f", {sec:.1f}s"
    ok = _record(n, c["passed"] and timed_ok, summary(c) + budget)
    assert ok, c


def test_criterion_01_rectangle_oracle(first_run):
    _criterion(first_run, 1, "rectangle_oracle", lambda c: f"{c['cases']} rectangles, max rel err {c['max_rel_error']:.2e} <= 1e-8")


def test_criterion_02_polygon_monte_carlo(first_run):
    _criterion(
        first_run,
        2,
        "polygon_monte_carlo",
        lambda c: f"{c['cases']} polygons, N={c['samples']}, max |dev| {c['max_deviation_in_se']:.2f} SE <= 4",
    )


def test_criterion_03_bound_soundness(first_run):
    _criterion(
        first_run,
        3,
        "bound_soundness",
        lambda c: f"{c['grasps']} grasps, N={c['samples']}, {len(c['violations'])} violations, worst margin {c['worst_margin']:.2e}",
    )


def test_criterion_04_polygon_conservativeness(first_run):
    _criterion(
        first_run,
        4,
        "polygon_conservativeness",
        lambda c: f"{c['sets']} perturbation sets, {c['counterexamples']} counterexamples, {c['indeterminate']} indeterminate",
    )


def test_criterion_05_joint_vertex_lp(first_run):
    _criterion(
        first_run,
        5,
        "joint_vs_per_edge_vertex_lp",
        lambda c: f"{c['cases']} instances, max |dtheta| {c['max_abs_diff']:.2e} <= 1e-7, {c['status_mismatches']} status mismatches",
    )


def test_criterion_06_vertex_lp_feasibility(first_run):
    _criterion(
        first_run,
        6,
        "vertex_lp_feasibility",
        lambda c: (
            f"{c['fc_grasps']} force-closure grasps with {c['infeasible_vertex_lps']} infeasible LPs, "
            f"{c['non_fc_grasps']} non-force-closure grasps with {c['non_fc_nonzero_bounds']} nonzero bounds"
        ),
    )


def test_criterion_07_gradient(first_run):
    _criterion(
        first_run,
        7,
        "gradient_vs_finite_differences",
        lambda c: f"{c['grasps']} grasps, max rel err {c['max_rel_error']:.2e} <= 1e-3 ({c['degenerate_skipped']} degenerate skipped)",
    )


def test_criterion_08_degenerate_sigma(first_run):
    _criterion(
        first_run,
        8,
        "degenerate_sigma_limits",
        lambda c: (
            f"FC L_fc={c['fc_l_fc']:.6f} P={c['fc_p_hat']}; non-FC L_fc={c['non_fc_l_fc']} P={c['non_fc_p_hat']}"
        ),
    )


def test_criterion_09_equator_synthesis(first_run):
    _criterion(
        first_run,
        9,
        "equator_synthesis",
        lambda c: f"{c['lowered']}/{c['restarts']} runs lowered mean |z| (need 8), monotone={c['monotone']}",
    )


def test_criterion_10_determinism(first_run, tmp_path):
    second = tmp_path / "again.json"
    proc, _ = _validate(second)
    same = second.exists() and first_run["path"].read_bytes() == second.read_bytes()
    ok = _record(10, same and proc.returncode == first_run["proc"].returncode, f"two `pong validate --seed {SEED}` reports byte-identical: {same}")
    assert ok
