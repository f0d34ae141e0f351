import numpy as np
import pytest

from pong.bound import evaluate
from pong.experiments import cap_grasp, explicit_grasp, random_fc_grasp, tripod
from pong.mcoracle import (
    McConfig,
    McEstimate,
    classify,
    estimate_pfc,
    finger_streams,
    sample_normals,
    verify_containment,
)
from pong.wrench import build_wrench_model, hull_contains_origin, random_wrenches


@pytest.fixture
def mid_grasp(explicit_skew):
    g = explicit_skew
    return explicit_grasp(g.surface, g.positions, [5 * c.sigmas for c in g.contacts], mu=g.mu)


def test_same_seed_same_estimate(mid_grasp):
    a = estimate_pfc(mid_grasp, McConfig(5000, seed=9))
    b = estimate_pfc(mid_grasp, McConfig(5000, seed=9))
    assert a.to_dict() == b.to_dict()
    c = estimate_pfc(mid_grasp, McConfig(5000, seed=10))
    assert c.n_success != a.n_success


def test_certified_classifier_matches_plain_hull_test(mid_grasp):
    m = build_wrench_model(mid_grasp)
    normals = sample_normals(mid_grasp, finger_streams(3, mid_grasp.n_fingers), 3000)
    W = random_wrenches(m, normals)
    contains, indet = classify(W)
    ref = hull_contains_origin(W)
    ok = ~indet & ~ref.indeterminate
    np.testing.assert_array_equal(contains[ok], ref.contains[ok])


def test_sampling_statistics(mid_grasp):
    normals = sample_normals(mid_grasp, finger_streams(0, mid_grasp.n_fingers), 40000)
    for i, c in enumerate(mid_grasp.contacts):
        eps = (normals[:, i] - c.mean_normal) @ c.tangent_basis.T
        np.testing.assert_allclose(eps.std(axis=0), c.sigmas, rtol=0.03)
        np.testing.assert_allclose((normals[:, i] - c.mean_normal) @ c.mean_normal, 0, atol=1e-12)


def test_bound_below_estimate(mid_grasp):
    est = estimate_pfc(mid_grasp, McConfig(20000, seed=1))
    assert evaluate(mid_grasp).l_fc <= est.upper(4.0)


def test_degenerate_limits():
    assert estimate_pfc(tripod(sigma=1e-4), McConfig(2000, seed=0)).p_hat == 1.0
    assert estimate_pfc(cap_grasp(np.random.default_rng(1), sigma=1e-4), McConfig(2000, seed=0)).p_hat == 0.0


def test_containment_holds_on_random_samples():
    rng = np.random.default_rng(8)
    for _ in range(3):
        g = random_fc_grasp(rng)
        m = build_wrench_model(g)
        normals = sample_normals(g, finger_streams(int(rng.integers(1000)), g.n_fingers), 500)
        rep = verify_containment(m, normals)
        assert rep.ok
        assert rep.n_conclusion >= rep.n_hypothesis - rep.n_indeterminate


def test_estimate_arithmetic():
    e = McEstimate.from_counts(25, 100, 0)
    assert e.p_hat == 0.25
    assert e.std_err == pytest.approx(np.sqrt(0.25 * 0.75 / 100))
    assert e.upper(2.0) == pytest.approx(0.25 + 2 * e.std_err)


def test_config_validation():
    with pytest.raises(ValueError):
        McConfig(n_samples=10)
    with pytest.raises(ValueError):
        McConfig(seed=-1)
