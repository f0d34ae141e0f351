import numpy as np
import pytest

from pong.experiments import cap_grasp, random_fc_grasp, sample_in_polygon
from pong.gausspoly import signed_area
from pong.mcoracle import verify_containment
from pong.vlp import (
    THETA_CAP_SIGMAS,
    SearchDirections,
    build_polygons,
    joint_vertex_lp,
    lift,
    solve_vertex,
)
from pong.wrench import build_wrench_model, hull_contains_origin, random_wrenches


def test_search_directions():
    d = SearchDirections.uniform(6)
    assert d.n_dirs == 6
    np.testing.assert_allclose(d.dirs[0], [1, 0])
    with pytest.raises(ValueError):
        SearchDirections(d.dirs[::-1])
    with pytest.raises(ValueError):
        SearchDirections([[1, 0], [0, 1]])


def test_joint_lp_matches_per_edge_min():
    rng = np.random.default_rng(11)
    for _ in range(15):
        g = random_fc_grasp(rng)
        m = build_wrench_model(g)
        i = int(rng.integers(g.n_fingers))
        a = rng.uniform(0, 2 * np.pi)
        d = np.array([np.cos(a), np.sin(a)])
        th, feasible, _ = solve_vertex(m, i, d, np.inf)
        th_joint, status = joint_vertex_lp(m, i, d)
        assert feasible and status == "optimal"
        assert th == pytest.approx(th_joint, abs=1e-7)


def test_polygons_are_ccw_and_capped(explicit_skew):
    m = build_wrench_model(explicit_skew)
    polys, ok, vs = build_polygons(m, explicit_skew)
    assert ok
    for p, c in zip(polys, explicit_skew.contacts):
        assert signed_area(p.vertices) > 0
        assert np.all(p.thetas > 0)
        assert np.all(p.thetas <= THETA_CAP_SIGMAS * c.sigmas.max() + 1e-15)


def test_vertex_is_the_largest_admissible_step(skew_grasp):
    """Just inside theta*, every edge's shifted hull keeps the origin; just beyond, one loses it."""
    m = build_wrench_model(skew_grasp)
    polys, ok, _ = build_polygons(m, skew_grasp)
    dirs = SearchDirections.uniform(skew_grasp.n_dirs).dirs
    for i, p in enumerate(polys):
        for k in np.nonzero(~p.capped_flags)[0]:
            d3 = lift(m, i, dirs[k])
            shifts = [m.t_maps[i, j] @ d3 for j in range(m.n_sides)]
            inside = [hull_contains_origin(m.w_bar + (1 - 1e-6) * p.thetas[k] * s[:, None]).contains[0] for s in shifts]
            beyond = [hull_contains_origin(m.w_bar + (1 + 1e-3) * p.thetas[k] * s[:, None]).contains[0] for s in shifts]
            assert all(inside)
            assert not all(beyond)


def test_polygon_perturbations_keep_force_closure(skew_grasp):
    rng = np.random.default_rng(5)
    m = build_wrench_model(skew_grasp)
    polys, _, _ = build_polygons(m, skew_grasp)
    eps = np.stack([sample_in_polygon(rng, p.vertices, 300) for p in polys], axis=1)
    normals = m.mean_normals + np.einsum("sia,iab->sib", eps, m.tangents)
    rep = verify_containment(m, normals)
    assert rep.ok
    assert rep.n_hypothesis == 300
    assert hull_contains_origin(random_wrenches(m, normals)).contains.all()


def test_non_force_closure_has_no_polygons():
    g = cap_grasp(np.random.default_rng(2))
    polys, ok, vs = build_polygons(build_wrench_model(g), g)
    assert polys is None and not ok and not vs.feasible


def test_polygon_json(explicit_skew):
    polys, _, _ = build_polygons(build_wrench_model(explicit_skew), explicit_skew)
    d = polys[0].to_dict()
    assert set(d) == {"vertices", "sigmas", "thetas", "capped", "mean"}
    assert len(d["vertices"]) == explicit_skew.n_dirs
