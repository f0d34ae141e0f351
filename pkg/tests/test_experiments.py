import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pong.experiments import (
    cap_grasp,
    gradient_error,
    plain,
    points_in_polygon,
    random_polygon,
    rectangle_probability,
    run_suite,
    sample_in_polygon,
    stream,
)
from pong.gausspoly import signed_area
from pong.wrench import build_wrench_model, min_weight_metric


def test_point_in_polygon_square_and_notch():
    sq = np.array([[0.0, 0], [1, 0], [1, 1], [0, 1]])
    pts = np.array([[0.5, 0.5], [1.5, 0.5], [-0.1, 0.2], [0.99, 0.01]])
    np.testing.assert_array_equal(points_in_polygon(pts, sq), [True, False, False, True])
    notch = np.array([[0.0, 0], [2, 0], [2, 2], [1, 0.5], [0, 2]])
    np.testing.assert_array_equal(points_in_polygon(np.array([[1.0, 1.5], [1.0, 0.2]]), notch), [False, True])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), convex=st.booleans())
def test_random_polygons_are_ccw(seed, convex):
    rng = np.random.default_rng(seed)
    v = random_polygon(rng, np.array([0.5, 1.0]), convex)
    assert 3 <= len(v) <= 12
    assert signed_area(v) > 0
    inside = sample_in_polygon(rng, v, 50)
    assert points_in_polygon(inside, v).all()


def test_rectangle_oracle_symmetry():
    assert rectangle_probability((1, 1), (0, 0), (-1, -1), (1, 1)) == pytest.approx(0.6826894921370859**2)


def test_cap_grasps_are_not_force_closure():
    rng = stream(0, "caps")
    for _ in range(20):
        assert min_weight_metric(build_wrench_model(cap_grasp(rng)).w_bar).l_bar_star == 0.0


def test_streams_are_independent_and_reproducible():
    a = stream(1, "x").random(4)
    np.testing.assert_array_equal(a, stream(1, "x").random(4))
    assert not np.array_equal(a, stream(1, "y").random(4))
    assert not np.array_equal(a, stream(2, "x").random(4))


def test_gradient_error_floor():
    assert gradient_error(np.array([1e-9]), np.array([0.0])) == pytest.approx(0.1)
    assert gradient_error(np.array([1.001]), np.array([1.0])) == pytest.approx(1e-3)


def test_plain_converts_numpy():
    d = plain({"a": np.float64(1.5), "b": [np.int64(2), np.array([1, 2])], "c": (np.bool_(True),)})
    assert d == {"a": 1.5, "b": [2, [1, 2]], "c": [True]}
    assert type(d["a"]) is float and type(d["b"][0]) is int


def test_quick_suite_passes_and_reports_in_order():
    seen = []
    rep = run_suite(1, quick=True, on_result=lambda r, s: seen.append(r["name"]))
    assert rep["passed"], [c for c in rep["checks"] if not c["passed"]]
    assert seen == [c["name"] for c in rep["checks"]]
    with pytest.raises(ValueError):
        run_suite(1, quick=True, only={"nope"})
