"""Command-line front end.

Exit codes: 0 success, 1 validation or bound-check failure, 2 bad input,
3 numerical failure.  Errors are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import FORMAT_VERSION, __version__
from .bound import DegenerateGradientError, evaluate, finite_difference_gradient, gradient
from .experiments import plain, random_grasp, run_suite, stream
from .gausspoly import OrientationError, PlanarGaussian, polygon_probability
from .grasp import GraspSpec, parse_field
from .mcoracle import McConfig, estimate_pfc
from .simplex import set_max_workers
from .surfaces import CurvatureParams, load_surface
from .synth import SynthConfig, SynthesisError, best_trace, synthesize_restarts
from .wrench import FrictionModel, LPError

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# I/O helpers


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(doc) -> str:
    return json.dumps(plain(doc), indent=2, sort_keys=True) + "\n"


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def manifest(args, command: str, seeds=None, sidecar: bool = False) -> dict:
    """Resolved configuration of a run.

    The copy embedded in an output leaves out the destination path and the
    timestamp so that a replay into another file is byte-identical; the
    sidecar manifest keeps both plus the argv needed to replay.
    """
    skip = {"func", "command", "argv"} | (set() if sidecar else {"out"})
    cfg = {k: str(v) if isinstance(v, Path) else v for k, v in sorted(vars(args).items()) if k not in skip}
    doc = {
        "command": command,
        "config": plain(cfg),
        "versions": {"artifact": __version__, "format_version": FORMAT_VERSION},
        "seeds": plain(seeds if seeds is not None else [getattr(args, "seed", None)]),
    }
    if sidecar:
        doc["argv"] = list(getattr(args, "argv", []))
        doc["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    return doc


def emit(args, text: str, command: str, seeds=None) -> None:
    """Write ``text`` to --out (plus a timestamped sidecar manifest) or stdout."""
    if getattr(args, "out", None):
        atomic_write(args.out, text)
        atomic_write(str(args.out) + ".manifest.json", dumps(manifest(args, command, seeds, sidecar=True)))
    else:
        sys.stdout.write(text)


def curvature_from(args) -> CurvatureParams | None:
    vals = {"k_curv": args.k_curv, "eps": args.eps, "sigma_sq_min": args.sigma_sq_min}
    if all(v is None for v in vals.values()):
        return None
    base = CurvatureParams()
    return CurvatureParams(**{k: (getattr(base, k) if v is None else v) for k, v in vals.items()})


def load_grasp_arg(args) -> GraspSpec:
    doc = read_json(args.grasp)
    if not isinstance(doc, dict):
        raise InputError(f"{args.grasp} is not a grasp document (expected a JSON object)")
    try:
        return GraspSpec.from_dict(doc, curvature_from(args))
    except (KeyError, TypeError, AttributeError) as exc:
        raise InputError(f"malformed grasp document: {exc!r}") from None


# ---------------------------------------------------------------------------
# commands


def cmd_eval(args) -> int:
    grasp = load_grasp_arg(args)
    rep = evaluate(grasp, with_gradient=False)
    method = None
    if args.grad:
        method = "analytic"
        try:
            rep.gradient = gradient(grasp) if rep.feasible else np.zeros(3 * grasp.n_fingers)
        except DegenerateGradientError:
            # nonunique LP duals change the derivative; fall back to central differences
            rep.gradient = finite_difference_gradient(grasp)
            method = "finite_difference"
    if args.dump_polygons:
        polys = [p.to_dict() for p in rep.polygons] if rep.polygons else []
        atomic_write(args.dump_polygons, dumps({"polygons": polys}))
    if args.csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        probs = list(rep.per_finger_probs)
        w.writerow(["l_fc", "l_bar_star", "feasible"] + [f"p_{i}" for i in range(len(probs))])
        w.writerow([repr(rep.l_fc), repr(rep.l_bar_star), int(rep.feasible)] + [repr(float(p)) for p in probs])
        text = buf.getvalue()
    else:
        doc = rep.to_dict(include_timing=args.timing)
        if method:
            doc["gradient_method"] = method
        doc["manifest"] = manifest(args, "eval")
        text = dumps(doc)
    emit(args, text, "eval")
    return EXIT_OK


def cmd_mc(args) -> int:
    grasp = load_grasp_arg(args)
    est = estimate_pfc(grasp, McConfig(args.samples, args.seed, args.z))
    doc = {"estimate": est.to_dict()}
    code = EXIT_OK
    if args.check_bound:
        l = evaluate(grasp).l_fc
        ok = l <= est.upper(args.z)
        doc["bound_check"] = {"l_fc": l, "upper": est.upper(args.z), "z": args.z, "sound": ok}
        code = EXIT_OK if ok else EXIT_FAIL
    doc["manifest"] = manifest(args, "mc")
    emit(args, dumps(doc), "mc")
    return code


def cmd_synth(args) -> int:
    surface = load_surface(args.surface)
    fld = parse_field(args.uncertainty_field, surface.center) if args.uncertainty_field else None
    cfg = SynthConfig(
        n_fingers=args.fingers,
        max_iters=args.max_iters,
        step_init=args.step_init,
        l_bar_min=args.l_bar_min,
        seed=args.seed,
        n_dirs=args.n_dirs,
    )
    friction = FrictionModel(args.mu, args.n_sides)
    traces = synthesize_restarts(surface, curvature_from(args), friction, cfg, args.restarts, fld)
    best = best_trace(traces)
    doc = {
        "best": traces.index(best),
        "best_l_fc": best.final_report.l_fc,
        "traces": [t.to_dict() for t in traces],
        "manifest": manifest(args, "synth", [t.seed for t in traces]),
    }
    emit(args, dumps(doc), "synth", [t.seed for t in traces])
    return EXIT_OK


def _polygon_input(args):
    path = args.polygon_file or args.polygon
    if path is None:
        raise InputError("a polygon JSON file is required")
    doc = read_json(path)
    sigma, mean = args.sigma, args.mu
    if isinstance(doc, dict):
        verts = doc.get("vertices")
        sigma = sigma or doc.get("sigma")
        mean = mean or doc.get("mu")
    else:
        verts = doc
    try:
        verts = np.asarray(verts, dtype=float)
    except (TypeError, ValueError):
        raise InputError("polygon vertices must be a list of [x, y] pairs") from None
    if verts.ndim != 2 or verts.shape[1] != 2:
        raise InputError("polygon vertices must be a list of [x, y] pairs")
    return verts, tuple(sigma or (1.0, 1.0)), tuple(mean or (0.0, 0.0))


def cmd_integrate(args) -> int:
    verts, sigma, mean = _polygon_input(args)
    p = polygon_probability(PlanarGaussian(sigma, mean), verts)
    if args.json:
        doc = {"probability": p, "sigma": list(sigma), "mu": list(mean), "vertices": verts.tolist()}
        emit(args, dumps(doc), "integrate")
    else:
        emit(args, f"{p:.6f}\n", "integrate")
    return EXIT_OK


def cmd_validate(args) -> int:
    only = set(args.only) if args.only else None

    def progress(result, seconds):
        verdict = "PASS" if result["passed"] else "FAIL"
        print(f"{verdict} {result['name']} {seconds:.2f}s", file=sys.stderr, flush=True)

    report = run_suite(args.seed, quick=args.quick, only=only, on_result=progress)
    report["versions"] = {"artifact": __version__, "format_version": FORMAT_VERSION}
    emit(args, dumps(report), "validate")
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_sweep(args) -> int:
    """Histogram of MC force-closure rate against L_fc bins for random grasps."""
    rng = stream(args.seed, "sweep")
    edges = np.linspace(0.0, 1.0, args.bins + 1)
    rows = [{"n": 0, "l_sum": 0.0, "p_sum": 0.0, "succ": 0, "samples": 0, "violations": 0} for _ in range(args.bins)]
    for _ in range(args.grasps):
        g = random_grasp(rng)
        l = evaluate(g).l_fc
        est = estimate_pfc(g, McConfig(args.samples, int(rng.integers(2**63))))
        b = min(int(np.searchsorted(edges, l, side="right")) - 1, args.bins - 1)
        r = rows[b]
        r["n"] += 1
        r["l_sum"] += l
        r["p_sum"] += est.p_hat
        r["succ"] += est.n_success
        r["samples"] += est.n_samples
        r["violations"] += l > est.upper(4.0)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_lo", "bin_hi", "n_grasps", "mean_l_fc", "mean_p_hat", "fc_samples", "non_fc_samples", "violations"])
    for lo, hi, r in zip(edges[:-1], edges[1:], rows):
        n = r["n"]
        w.writerow(
            [
                f"{lo:.4f}",
                f"{hi:.4f}",
                n,
                repr(r["l_sum"] / n) if n else "",
                repr(r["p_sum"] / n) if n else "",
                r["succ"],
                r["samples"] - r["succ"],
                r["violations"],
            ]
        )
    emit(args, buf.getvalue(), "sweep")
    return EXIT_OK if sum(r["violations"] for r in rows) == 0 else EXIT_FAIL


def cmd_replay(args) -> int:
    """Re-run the command recorded in a manifest and optionally compare bytes."""
    doc = read_json(args.manifest)
    argv = doc.get("argv")
    if not argv:
        raise InputError("manifest has no argv")
    if doc.get("versions", {}).get("format_version") != FORMAT_VERSION:
        raise InputError("manifest was written by an incompatible format version")
    original = doc.get("config", {}).get("out")
    argv = list(argv)
    if args.out:
        if "--out" in argv:
            argv[argv.index("--out") + 1] = str(args.out)
        else:
            argv += ["--out", str(args.out)]
    code = main(argv)
    if args.check and original and args.out:
        same = Path(original).read_bytes() == Path(args.out).read_bytes()
        print(json.dumps({"identical": same}))
        return code if same else EXIT_FAIL
    return code


# ---------------------------------------------------------------------------
# parser


def _env_seed() -> int:
    raw = os.environ.get("PONG_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"PONG_SEED must be an integer, got {raw!r}") from None


def _curvature_flags(p):
    p.add_argument("--k-curv", type=float, default=None, help="curvature-to-variance scale")
    p.add_argument("--eps", type=float, default=None, help="curvature offset")
    p.add_argument("--sigma-sq-min", type=float, default=None, help="variance floor")


def build_parser() -> argparse.ArgumentParser:
    seed = _env_seed()
    parser = argparse.ArgumentParser(prog="pong", description="Probability-of-force-closure lower bound tools.")
    parser.add_argument("--version", action="version", version=f"pong {__version__}")
    parser.add_argument("--threads", type=int, default=None, help="cap on internal worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate L_fc for a grasp")
    p.add_argument("grasp", type=Path)
    p.add_argument("--grad", action="store_true", help="include dL_fc/d(contact positions)")
    p.add_argument("--dump-polygons", type=Path, default=None)
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="JSON output (default)")
    fmt.add_argument("--csv", action="store_true")
    p.add_argument("--timing", action="store_true", help="include per-stage timings")
    p.add_argument("--out", type=Path, default=None)
    _curvature_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("mc", help="Monte Carlo estimate of the force-closure probability")
    p.add_argument("grasp", type=Path)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--z", type=float, default=4.0, help="standard errors allowed by --check-bound")
    p.add_argument("--check-bound", action="store_true")
    p.add_argument("--out", type=Path, default=None)
    _curvature_flags(p)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("synth", help="grasp synthesis by projected gradient ascent")
    p.add_argument("--surface", type=Path, required=True)
    p.add_argument("--fingers", type=int, default=3)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--uncertainty-field", default=None, help="equator:<scale> or constant:<s1>,<s2>")
    p.add_argument("--max-iters", type=int, default=40)
    p.add_argument("--step-init", type=float, default=0.1)
    p.add_argument("--l-bar-min", type=float, default=0.3)
    p.add_argument("--n-dirs", type=int, default=8)
    p.add_argument("--mu", type=float, default=0.5)
    p.add_argument("--n-sides", type=int, default=4)
    p.add_argument("--out", type=Path, default=None)
    _curvature_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("integrate", help="Gaussian probability of a counterclockwise polygon")
    p.add_argument("polygon_file", nargs="?", type=Path, default=None)
    p.add_argument("--polygon", type=Path, default=None)
    p.add_argument("--sigma", type=float, nargs=2, default=None)
    p.add_argument("--mu", type=float, nargs=2, default=None)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("validate", help="run the property suite and write a pass/fail report")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--only", nargs="*", default=None, help="subset of check names")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="CSV histogram of MC success rate against L_fc bins")
    p.add_argument("--grasps", type=int, default=50)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--check", action="store_true", help="compare the new output with the original")
    p.set_defaults(func=cmd_replay)
    return parser


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser()
    except InputError as exc:
        return _fail(EXIT_INPUT, "input", str(exc))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_INPUT
    args.argv = argv
    if args.threads is not None:
        set_max_workers(args.threads)
    try:
        return args.func(args)
    except (InputError, OrientationError, SynthesisError) as exc:
        return _fail(EXIT_INPUT, type(exc).__name__, str(exc))
    except (LPError, DegenerateGradientError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERIC, type(exc).__name__, str(exc))
    except (ValueError, KeyError, TypeError, OSError) as exc:
        return _fail(EXIT_INPUT, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
