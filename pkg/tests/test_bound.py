import numpy as np
import pytest

from pong.bound import DegenerateGradientError, evaluate, finite_difference_gradient, gradient, l_fc
from pong.experiments import cap_grasp, explicit_grasp, gradient_error
from pong.gausspoly import PlanarGaussian, polygon_probability


def scaled(grasp, c):
    return explicit_grasp(grasp.surface, grasp.positions, [c * d.sigmas for d in grasp.contacts], mu=grasp.mu)


@pytest.fixture
def wide(explicit_skew):
    return scaled(explicit_skew, 4.0)


def test_bound_factorizes(wide):
    rep = evaluate(wide)
    assert rep.feasible
    probs = [polygon_probability(PlanarGaussian(tuple(p.sigmas)), p.vertices) for p in rep.polygons]
    np.testing.assert_allclose(rep.per_finger_probs, probs, rtol=1e-14)
    assert rep.l_fc == pytest.approx(np.prod(probs), rel=1e-14)
    assert 0 < rep.l_fc < 1
    assert l_fc(wide) == rep.l_fc


def test_non_force_closure_is_zero():
    g = cap_grasp(np.random.default_rng(0))
    rep = evaluate(g)
    assert rep.l_fc == 0.0 and not rep.feasible and rep.l_bar_star == 0.0
    np.testing.assert_array_equal(gradient(g), 0.0)


@pytest.mark.parametrize("name", ["skew_grasp", "wide"])
def test_gradient_matches_finite_differences(name, request):
    g = request.getfixturevalue(name)
    assert gradient_error(gradient(g), finite_difference_gradient(g, h=1e-5)) <= 1e-3


def test_free_fingers_selects_rows(skew_grasp):
    full = gradient(skew_grasp).reshape(-1, 3)
    part = gradient(skew_grasp, free_fingers=[2, 0]).reshape(-1, 3)
    np.testing.assert_allclose(part, full[[2, 0]])


def test_rigid_translation_is_invariant(skew_grasp, wide):
    for g in (skew_grasp, wide):
        sel, origin_grad, rigid = gradient(g, with_origin=True)
        assert np.abs(rigid).max() <= 1e-10 * (1 + np.abs(sel).max())


def test_shrinking_sigmas_never_lowers_the_bound(wide):
    prev = evaluate(scaled(wide, 2.0)).l_fc
    for c in (1.0, 0.5, 0.25, 0.1):
        cur = evaluate(scaled(wide, c)).l_fc
        assert cur >= prev - 1e-12
        prev = cur


def test_symmetric_grasp_gradient_is_flagged(tripod_grasp):
    # exact symmetry makes the vertex LP duals nonunique in a way that matters
    with pytest.raises(DegenerateGradientError):
        gradient(tripod_grasp)


def test_report_serialization(wide):
    d = evaluate(wide, with_gradient=True).to_dict(include_polygons=True, include_timing=False)
    assert {"l_fc", "per_finger_probs", "feasible", "l_bar_star", "gradient", "polygons"} <= set(d)
    assert "timing" not in d
    assert len(d["gradient"]) == 3 * wide.n_fingers
