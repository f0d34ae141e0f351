import numpy as np
import pytest

from pong.experiments import cap_grasp, random_fc_grasp
from pong.wrench import (
    FrictionModel,
    build_wrench_model,
    generator_angles,
    hull_contains_origin,
    min_weight_metric,
    random_wrenches,
    skew,
)


def test_skew_is_cross_product(rng):
    a, b = rng.normal(size=(2, 3))
    np.testing.assert_allclose(skew(a) @ b, np.cross(a, b))


def test_basis_wrench_columns(tripod_grasp):
    m = build_wrench_model(tripod_grasp)
    ang = generator_angles(tripod_grasp.n_sides)
    for i, c in enumerate(tripod_grasp.contacts):
        t1, t2 = c.tangent_basis
        n = c.mean_normal
        for j in range(tripod_grasp.n_sides):
            g = np.cos(ang[j]) * t1 + np.sin(ang[j]) * t2
            f = n + tripod_grasp.mu * np.cross(g, n)
            col = m.w_bar[:, i * tripod_grasp.n_sides + j]
            np.testing.assert_allclose(col[:3], f, atol=1e-14)
            np.testing.assert_allclose(col[3:], np.cross(c.position - tripod_grasp.torque_origin, f), atol=1e-14)
            # pyramid edge sits on the friction cone boundary
            ft = f - (f @ n) * n
            assert np.linalg.norm(ft) == pytest.approx(tripod_grasp.mu * (f @ n))


def test_random_wrenches_reduce_to_mean(tripod_grasp):
    m = build_wrench_model(tripod_grasp)
    normals = np.array([c.mean_normal for c in tripod_grasp.contacts])
    np.testing.assert_allclose(random_wrenches(m, normals), m.w_bar, atol=1e-14)
    batch = random_wrenches(m, np.stack([normals, normals]))
    assert batch.shape == (2, 6, m.n_w)


def test_hull_contains_origin_simple_cases():
    # +-e_k in R^6: origin is interior
    W = np.hstack([np.eye(6), -np.eye(6)])
    h = hull_contains_origin(W)
    assert h.contains[0] and not h.indeterminate[0]
    np.testing.assert_allclose(W @ h.weights[0], 0, atol=1e-12)
    # shifted away: not contained
    h2 = hull_contains_origin(W + 3.0)
    assert not h2.contains[0] and not h2.indeterminate[0]


def test_hull_batch_matches_single(rng):
    W = rng.normal(size=(20, 6, 12)) + rng.normal(size=(20, 6, 1)) * 0.8
    batch = hull_contains_origin(W)
    for k in range(20):
        one = hull_contains_origin(W[k])
        assert one.contains[0] == batch.contains[k]


def test_min_weight_metric_uniform_weights_score_one():
    W = np.hstack([np.eye(6), -np.eye(6)])
    mw = min_weight_metric(W)
    assert mw.feasible and mw.rank == 6
    assert mw.l_bar_star == pytest.approx(1.0)


def test_min_weight_rank_deficient_is_infeasible():
    W = np.hstack([np.eye(6)[:, :5], -np.eye(6)[:, :5]])
    mw = min_weight_metric(W)
    assert not mw.feasible and mw.l_bar_star == 0.0 and mw.rank == 5


def test_min_weight_agrees_with_hull_test():
    rng = np.random.default_rng(3)
    for _ in range(10):
        g = random_fc_grasp(rng)
        W = build_wrench_model(g).w_bar
        assert hull_contains_origin(W).contains[0]
        assert 0 < min_weight_metric(W).l_bar_star <= 1 + 1e-12
        g2 = cap_grasp(rng)
        assert min_weight_metric(build_wrench_model(g2).w_bar).l_bar_star == 0.0


def test_friction_model_validation():
    with pytest.raises(ValueError):
        FrictionModel(mu=0.0)
    with pytest.raises(ValueError):
        FrictionModel(n_sides=0)
