"""Random instance generators and the property checks behind ``pong validate``.

Every check takes an explicit seed, derives its own Philox stream from it
and returns a JSON-ready dict with a ``passed`` flag.  Nothing in a check
result depends on wall-clock time, so reports are byte-reproducible.
"""

from __future__ import annotations

import math
import time
import zlib

import numpy as np

from .bound import DegenerateGradientError, evaluate, finite_difference_gradient, gradient
from .gausspoly import PlanarGaussian, polygon_probability
from .grasp import CurvatureModel, EquatorField, ExplicitModel, GraspSpec
from .mcoracle import McConfig, estimate_pfc
from .surfaces import ContactDistribution, CurvatureParams, ImplicitSurface
from .synth import SynthConfig, synthesize_restarts
from .vlp import SearchDirections, joint_vertex_lp, solve_vertex, solve_vertices
from .wrench import build_wrench_model, hull_contains_origin, min_weight_metric, random_wrenches


def stream(seed: int, label: str) -> np.random.Generator:
    """Independent generator per (seed, check) pair."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(label.encode())])
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# planar instances


def normal_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def rectangle_probability(sigmas, mean, lo, hi) -> float:
    """Product of one-dimensional normal CDF differences (stdlib erf)."""
    p = 1.0
    for k in range(2):
        p *= normal_cdf((hi[k] - mean[k]) / sigmas[k]) - normal_cdf((lo[k] - mean[k]) / sigmas[k])
    return p


def random_rectangle(rng):
    sig = np.exp(rng.uniform(np.log(0.05), np.log(3.0), 2))
    mean = rng.normal(0.0, 1.0, 2)
    lo = mean + rng.uniform(-3.0, 1.0, 2) * sig
    hi = lo + rng.uniform(0.2, 4.0, 2) * sig
    return sig, mean, lo, hi


def random_polygon(rng, sig, convex: bool, mean=(0.0, 0.0)):
    """Counterclockwise polygon with 3-12 vertices, star-shaped about a point near ``mean``.

    Angular gaps stay below pi so the vertex order is counterclockwise
    about the star center.
    """
    m = int(rng.integers(3, 13))
    while True:
        ang = np.sort(rng.uniform(0.0, 2 * np.pi, m))
        gaps = np.diff(np.append(ang, ang[0] + 2 * np.pi))
        if gaps.min() >= 0.05 and gaps.max() < 0.9 * np.pi:
            break
    scale = sig.max() * rng.uniform(0.5, 3.0)
    if convex:
        rad = np.full(m, scale)
    else:
        rad = scale * rng.uniform(0.3, 1.0, m)
    center = np.asarray(mean) + rng.normal(0.0, 0.7, 2) * sig
    return center + np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)


def points_in_polygon(pts: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Even-odd crossing test for many points against one simple polygon."""
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), bool)
    m = len(verts)
    for k in range(m):
        (x1, y1), (x2, y2) = verts[k], verts[(k + 1) % m]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < xi)
    return inside


def polygon_mc(sig, mean, verts, n: int, rng, chunk: int = 250_000):
    hits = 0
    done = 0
    while done < n:
        k = min(chunk, n - done)
        pts = mean + rng.standard_normal((k, 2)) * sig
        hits += int(points_in_polygon(pts, verts).sum())
        done += k
    p = hits / n
    return p, math.sqrt(max(p * (1 - p), 0.0) / n)


# ---------------------------------------------------------------------------
# grasps


def random_surface(rng, kinds=("sphere", "ellipsoid", "superquadric")) -> ImplicitSurface:
    kind = kinds[int(rng.integers(len(kinds)))]
    center = rng.normal(0.0, 0.2, 3)
    if kind == "sphere":
        return ImplicitSurface("sphere", {"radius": float(rng.uniform(0.05, 1.5))}, center)
    radii = rng.uniform(0.5, 1.5, 3).tolist()
    if kind == "ellipsoid":
        return ImplicitSurface("ellipsoid", {"radii": radii}, center)
    return ImplicitSurface("superquadric", {"radii": radii, "exponents": rng.uniform(1.2, 2.0, 2).tolist()}, center)


def _ring_points(rng, surface, n_f: int, spread: float):
    """Contacts scattered around a random great circle through the center."""
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    ang = 2 * np.pi * np.arange(n_f) / n_f + rng.normal(0.0, spread, n_f)
    d = np.stack([np.cos(ang), np.sin(ang), rng.normal(0.0, spread, n_f)], axis=1) @ Q.T
    return np.array([surface.ray_point(v) for v in d])


def explicit_grasp(surface, positions, sigmas, **kw) -> GraspSpec:
    dists = []
    for x, s in zip(positions, sigmas):
        _, g, _ = surface.eval(x)
        dists.append(ContactDistribution.from_normal(x, -g / np.linalg.norm(g), s))
    return GraspSpec.from_distributions(dists, torque_origin=surface.center, surface=surface, **kw)


def random_grasp(rng, surface=None, sigma_mode=None, n_fingers=None, spread=0.3) -> GraspSpec:
    surface = surface or random_surface(rng)
    n_f = n_fingers or int(rng.integers(3, 5))
    mode = sigma_mode or ("curvature" if rng.random() < 0.5 else "explicit")
    mu = float(rng.uniform(0.3, 0.8))
    x = _ring_points(rng, surface, n_f, spread)
    if mode == "curvature":
        k = float(np.exp(rng.uniform(np.log(0.005), np.log(1.0))))
        curv = CurvatureParams(k_curv=k, eps=1.0, sigma_sq_min=1e-6)
        return GraspSpec.from_models(x, CurvatureModel(surface, curv), surface=surface, mu=mu, curvature=curv)
    sig = np.exp(rng.uniform(np.log(0.01), np.log(0.5), (n_f, 2)))
    return explicit_grasp(surface, x, sig, mu=mu)


def random_fc_grasp(rng, max_tries: int = 1000, **kw) -> GraspSpec:
    for _ in range(max_tries):
        g = random_grasp(rng, **kw)
        if min_weight_metric(build_wrench_model(g).w_bar).l_bar_star > 1e-6:
            return g
    raise RuntimeError("no force-closure grasp generated")


def cap_grasp(rng, sigma: float | None = None) -> GraspSpec:
    """Contacts inside a 40 degree cap of a sphere: never force closure for mu < 0.8."""
    surface = ImplicitSurface("sphere", {"radius": float(rng.uniform(0.2, 1.5))}, rng.normal(0, 0.2, 3))
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    n_f = int(rng.integers(2, 5))
    pts = []
    while len(pts) < n_f:
        v = axis + rng.normal(0.0, 0.4, 3)
        v /= np.linalg.norm(v)
        if v @ axis >= math.cos(math.radians(40)):
            pts.append(surface.ray_point(v))
    s = sigma if sigma is not None else float(rng.uniform(0.01, 0.3))
    return explicit_grasp(surface, np.array(pts), np.full((n_f, 2), s), mu=float(rng.uniform(0.3, 0.6)))


def tripod(radius: float = 1.0, sigma: float = 1e-4, mu: float = 0.5) -> GraspSpec:
    s = ImplicitSurface("sphere", {"radius": radius}, np.zeros(3))
    a = 2 * np.pi * np.arange(3) / 3
    x = radius * np.stack([np.cos(a), np.sin(a), np.zeros(3)], axis=1)
    return explicit_grasp(s, x, np.full((3, 2), sigma), mu=mu)


def sample_in_polygon(rng, verts: np.ndarray, n: int) -> np.ndarray:
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    out = np.empty((0, 2))
    while len(out) < n:
        pts = rng.uniform(lo, hi, (4 * n, 2))
        out = np.concatenate([out, pts[points_in_polygon(pts, verts)]])
    return out[:n]


# ---------------------------------------------------------------------------
# checks


def plain(obj):
    """Convert numpy scalars and arrays inside nested containers to builtins."""
    if isinstance(obj, dict):
        return {k: plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _result(name, passed, **detail) -> dict:
    return plain({"name": name, "passed": bool(passed), **detail})


def check_rectangle(seed: int, n: int = 50, tol: float = 1e-8) -> dict:
    rng = stream(seed, "rectangle")
    worst = 0.0
    for _ in range(n):
        sig, mean, lo, hi = random_rectangle(rng)
        verts = np.array([lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]])
        p = polygon_probability(PlanarGaussian(tuple(sig), tuple(mean)), verts)
        ref = rectangle_probability(sig, mean, lo, hi)
        worst = max(worst, abs(p - ref) / ref)
    return _result("rectangle_oracle", worst <= tol, cases=n, max_rel_error=worst, tol=tol)


def check_polygon_mc(seed: int, n: int = 50, n_mc: int = 1_000_000, z: float = 4.0) -> dict:
    rng = stream(seed, "polygon_mc")
    worst = 0.0
    fails = 0
    for k in range(n):
        sig = np.exp(rng.uniform(np.log(0.1), np.log(2.0), 2))
        mean = rng.normal(0.0, 0.5, 2)
        verts = random_polygon(rng, sig, convex=bool(k % 2), mean=mean)
        p = polygon_probability(PlanarGaussian(tuple(sig), tuple(mean)), verts)
        p_mc, se = polygon_mc(sig, mean, verts, n_mc, rng)
        dev = abs(p - p_mc) / se if se > 0 else (0.0 if abs(p - p_mc) < 1e-12 else math.inf)
        worst = max(worst, dev)
        fails += dev > z
    return _result("polygon_monte_carlo", fails == 0, cases=n, samples=n_mc, max_deviation_in_se=worst, violations=fails)


def check_soundness(seed: int, n_grasps: int = 100, n_mc: int = 100_000, z: float = 4.0) -> dict:
    rng = stream(seed, "soundness")
    violations = []
    n_feasible = 0
    n_indet = 0
    worst_margin = -math.inf
    for k in range(n_grasps):
        g = random_grasp(rng, sigma_mode="curvature" if k % 2 == 0 else "explicit")
        rep = evaluate(g)
        est = estimate_pfc(g, McConfig(n_mc, seed=int(rng.integers(2**63))))
        n_feasible += rep.feasible
        n_indet += est.n_indeterminate
        margin = rep.l_fc - (est.p_hat + z * est.std_err)
        worst_margin = max(worst_margin, margin)
        if margin > 0:
            violations.append({"index": k, "l_fc": rep.l_fc, "p_hat": est.p_hat, "std_err": est.std_err})
    return _result(
        "bound_soundness",
        not violations,
        grasps=n_grasps,
        feasible=n_feasible,
        samples=n_mc,
        indeterminate=n_indet,
        worst_margin=worst_margin,
        violations=violations,
    )


def check_conservativeness(seed: int, n_sets: int = 1000, per_grasp: int = 50) -> dict:
    rng = stream(seed, "conservativeness")
    counter = 0
    indet = 0
    done = 0
    while done < n_sets:
        g = random_fc_grasp(rng)
        rep = evaluate(g)
        model = build_wrench_model(g)
        k = min(per_grasp, n_sets - done)
        eps = np.empty((k, g.n_fingers, 2))
        for i, poly in enumerate(rep.polygons):
            inner = sample_in_polygon(rng, poly.vertices, k)
            # every third set uses points on the polygon boundary, shrunk slightly
            m = poly.vertices
            e = rng.integers(len(m), size=k)
            t = rng.random(k)[:, None]
            edge = 0.999 * ((1 - t) * m[e] + t * m[(e + 1) % len(m)])
            eps[:, i] = np.where((np.arange(k) % 3 == 0)[:, None], edge, inner)
        normals = np.array([c.mean_normal for c in g.contacts]) + np.einsum(
            "sia,iab->sib", eps, np.array([c.tangent_basis for c in g.contacts])
        )
        h = hull_contains_origin(random_wrenches(model, normals))
        counter += int((~h.contains & ~h.indeterminate).sum())
        indet += int(h.indeterminate.sum())
        done += k
    return _result("polygon_conservativeness", counter == 0, sets=n_sets, counterexamples=counter, indeterminate=indet)


def check_joint_equivalence(seed: int, n: int = 200, tol: float = 1e-7) -> dict:
    rng = stream(seed, "joint_equivalence")
    worst = 0.0
    mismatched = 0
    unbounded = 0
    done = 0
    while done < n:
        g = random_fc_grasp(rng)
        n_s = int(rng.choice([3, 4, 5, 6]))
        g = GraspSpec(g.contacts, g.models, g.mu, n_s, g.n_dirs, g.torque_origin, g.surface, g.curvature)
        model = build_wrench_model(g)
        if min_weight_metric(model.w_bar).l_bar_star <= 1e-6:
            continue
        done += 1
        i = int(rng.integers(g.n_fingers))
        a = rng.uniform(0, 2 * np.pi)
        d = np.array([math.cos(a), math.sin(a)])
        th_edge, feas, _ = solve_vertex(model, i, d, math.inf)
        th_joint, status = joint_vertex_lp(model, i, d)
        if status == "unbounded" and th_edge == math.inf:
            unbounded += 1
            continue
        if not feas or status != "optimal":
            mismatched += 1
            continue
        worst = max(worst, abs(th_edge - th_joint))
    return _result(
        "joint_vs_per_edge_vertex_lp",
        worst <= tol and mismatched == 0,
        cases=n,
        max_abs_diff=worst,
        tol=tol,
        both_unbounded=unbounded,
        status_mismatches=mismatched,
    )


def check_feasibility(seed: int, n_fc: int = 200, n_nonfc: int = 50) -> dict:
    rng = stream(seed, "feasibility")
    infeasible_lps = 0
    for _ in range(n_fc):
        g = random_fc_grasp(rng)
        vs = solve_vertices(build_wrench_model(g), SearchDirections.uniform(g.n_dirs))
        infeasible_lps += int((vs.status == 1).sum())
    nonzero = 0
    for _ in range(n_nonfc):
        g = cap_grasp(rng)
        nonzero += evaluate(g).l_fc != 0.0
    return _result(
        "vertex_lp_feasibility",
        infeasible_lps == 0 and nonzero == 0,
        fc_grasps=n_fc,
        infeasible_vertex_lps=infeasible_lps,
        non_fc_grasps=n_nonfc,
        non_fc_nonzero_bounds=nonzero,
    )


def gradient_error(ga: np.ndarray, gf: np.ndarray, floor: float = 1e-8) -> float:
    """Componentwise relative error with an absolute floor on the reference."""
    return float(np.max(np.abs(ga - gf) / np.maximum(np.abs(gf), floor)))


def check_gradient(seed: int, n: int = 20, tol: float = 1e-3, max_tries: int = 400) -> dict:
    rng = stream(seed, "gradient")
    worst = 0.0
    done = tries = degenerate = 0
    while done < n and tries < max_tries:
        tries += 1
        surface = random_surface(rng, kinds=("sphere", "ellipsoid", "superquadric"))
        curv = CurvatureParams(k_curv=float(np.exp(rng.uniform(np.log(0.01), np.log(0.3)))), eps=1.0)
        try:
            x = _ring_points(rng, surface, 3, 0.3)
            g = GraspSpec.from_models(x, CurvatureModel(surface, curv), surface=surface, curvature=curv)
        except ValueError:
            continue
        rep = evaluate(g)
        if not rep.feasible or rep.l_fc < 1e-4:
            continue
        try:
            ga = gradient(g)
        except DegenerateGradientError:
            degenerate += 1
            continue
        gf = finite_difference_gradient(g, h=1e-5)
        worst = max(worst, gradient_error(ga, gf))
        done += 1
    return _result(
        "gradient_vs_finite_differences",
        done == n and worst <= tol,
        grasps=done,
        degenerate_skipped=degenerate,
        max_rel_error=worst,
        tol=tol,
    )


def check_degenerate_sigma(seed: int, n_mc: int = 10_000) -> dict:
    rng = stream(seed, "degenerate_sigma")
    fc = tripod(sigma=1e-4)
    l_fc = evaluate(fc).l_fc
    p_fc = estimate_pfc(fc, McConfig(n_mc, seed=int(rng.integers(2**63)))).p_hat
    nfc = cap_grasp(rng, sigma=1e-4)
    l_n = evaluate(nfc).l_fc
    p_n = estimate_pfc(nfc, McConfig(n_mc, seed=int(rng.integers(2**63)))).p_hat
    ok = l_fc >= 1 - 1e-3 and p_fc == 1.0 and l_n == 0.0 and p_n == 0.0
    return _result("degenerate_sigma_limits", ok, fc_l_fc=l_fc, fc_p_hat=p_fc, non_fc_l_fc=l_n, non_fc_p_hat=p_n)


def check_equator_synthesis(seed: int, restarts: int = 10, max_iters: int = 30, need: int = 8) -> dict:
    surface = ImplicitSurface("sphere", {"radius": 1.0}, np.zeros(3))
    traces = synthesize_restarts(
        surface,
        cfg=SynthConfig(seed=int(seed), max_iters=max_iters),
        restarts=restarts,
        field=EquatorField(0.5, surface.center),
    )
    lowered = 0
    monotone = True
    rows = []
    for t in traces:
        z0 = float(np.abs(t.initial_contacts[:, 2]).mean())
        z1 = float(np.abs(t.final_contacts[:, 2]).mean())
        acc = [it.l_fc for it in t.accepted]
        mono = all(b >= a for a, b in zip(acc, acc[1:]))
        monotone &= mono
        lowered += z1 < z0
        rows.append({"initial_mean_abs_z": z0, "final_mean_abs_z": z1, "l_fc_initial": acc[0], "l_fc_final": acc[-1]})
    return _result(
        "equator_synthesis",
        lowered >= need and monotone,
        restarts=restarts,
        lowered=lowered,
        monotone=monotone,
        runs=rows,
    )


FULL = {
    "rectangle": lambda s: check_rectangle(s),
    "polygon_mc": lambda s: check_polygon_mc(s),
    "soundness": lambda s: check_soundness(s),
    "conservativeness": lambda s: check_conservativeness(s),
    "joint_equivalence": lambda s: check_joint_equivalence(s),
    "feasibility": lambda s: check_feasibility(s),
    "gradient": lambda s: check_gradient(s),
    "degenerate_sigma": lambda s: check_degenerate_sigma(s),
    "equator_synthesis": lambda s: check_equator_synthesis(s),
}

QUICK = {
    "rectangle": lambda s: check_rectangle(s, n=20),
    "polygon_mc": lambda s: check_polygon_mc(s, n=5, n_mc=100_000),
    "soundness": lambda s: check_soundness(s, n_grasps=5, n_mc=5_000),
    "conservativeness": lambda s: check_conservativeness(s, n_sets=200),
    "joint_equivalence": lambda s: check_joint_equivalence(s, n=20),
    "feasibility": lambda s: check_feasibility(s, n_fc=20, n_nonfc=10),
    "gradient": lambda s: check_gradient(s, n=3),
    "degenerate_sigma": lambda s: check_degenerate_sigma(s, n_mc=2_000),
    "equator_synthesis": lambda s: check_equator_synthesis(s, restarts=3, max_iters=10, need=2),
}


def run_suite(seed: int, quick: bool = False, only=None, on_result=None) -> dict:
    """Run the selected checks in a fixed order.

    ``on_result(result, seconds)`` is called after each check; wall time is
    reported only through it so the returned report stays reproducible.
    """
    suite = QUICK if quick else FULL
    unknown = set(only or ()) - set(suite)
    if unknown:
        raise ValueError(f"unknown checks {sorted(unknown)}; choose from {list(suite)}")
    names = [n for n in suite if only is None or n in only]
    checks = []
    for n in names:
        t0 = time.perf_counter()
        checks.append(suite[n](seed))
        if on_result is not None:
            on_result(checks[-1], time.perf_counter() - t0)
    return {"seed": int(seed), "quick": bool(quick), "passed": all(c["passed"] for c in checks), "checks": checks}
