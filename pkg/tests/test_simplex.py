import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pong.simplex import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    LinearProgram,
    Status,
    simplex_arrays,
    solve,
    solve_batch,
)


def vertex_enumeration(c, A, b):
    """Best basic feasible solution of max c.z, Az = b, z >= 0 by brute force."""
    m, n = A.shape
    best, arg = -np.inf, None
    for cols in itertools.combinations(range(n), m):
        B = A[:, cols]
        if abs(np.linalg.det(B)) < 1e-10:
            continue
        zb = np.linalg.solve(B, b)
        if np.any(zb < -1e-9):
            continue
        z = np.zeros(n)
        z[list(cols)] = zb
        if c @ z > best:
            best, arg = c @ z, z
    return best, arg


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 3), extra=st.integers(1, 4))
def test_bounded_random_lps_match_vertex_enumeration(seed, m, extra):
    rng = np.random.default_rng(seed)
    n = m + extra
    A = rng.normal(size=(m, n))
    z0 = rng.uniform(0.1, 1.0, n)
    b = A @ z0
    # bound the region with a simplex-type row
    A = np.vstack([A, np.ones(n)])
    b = np.append(b, z0.sum())
    c = rng.normal(size=n)
    ref, _ = vertex_enumeration(c, A, b)
    sol = solve(LinearProgram(c, A, b))
    assert sol.status is Status.OPTIMAL
    assert sol.objective_value == pytest.approx(ref, abs=1e-8)
    np.testing.assert_allclose(A @ sol.z_star, b, atol=1e-8)
    assert np.all(sol.z_star >= -1e-9)


def test_known_small_lp():
    # max x + y  s.t.  x + 2y + s1 = 4, 3x + y + s2 = 6
    A = np.array([[1.0, 2, 1, 0], [3, 1, 0, 1]])
    sol = solve(LinearProgram([1, 1, 0, 0], A, [4, 6]))
    assert sol.optimal
    np.testing.assert_allclose(sol.z_star[:2], [1.6, 1.2], atol=1e-12)
    assert sol.objective_value == pytest.approx(2.8)
    # strong duality: b.y equals the optimum
    assert np.array([4, 6]) @ sol.dual == pytest.approx(2.8)


def test_infeasible_and_unbounded():
    inf = solve(LinearProgram([1.0, 0.0], [[1.0, 1.0]], [-1.0]))
    assert inf.status is Status.INFEASIBLE
    unb = solve(LinearProgram([1.0, 0.0], [[1.0, -1.0]], [1.0]))
    assert unb.status is Status.UNBOUNDED


def test_free_variables():
    # max -|x| style: x free, x = -3 forced
    sol = solve(LinearProgram([1.0], [[1.0]], [-3.0], nonneg=[False]))
    assert sol.optimal
    assert sol.z_star[0] == pytest.approx(-3.0)


def test_batch_results_independent_of_batch_mates(rng):
    A = rng.normal(size=(5, 3, 6))
    z0 = rng.uniform(0.2, 1, (5, 6))
    b = np.einsum("bij,bj->bi", A, z0)
    A = np.concatenate([A, np.ones((5, 1, 6))], axis=1)
    b = np.concatenate([b, z0.sum(1, keepdims=True)], axis=1)
    c = rng.normal(size=6)
    full = simplex_arrays(c, A, b)
    for k in range(5):
        one = simplex_arrays(c, A[k : k + 1], b[k : k + 1])
        assert one.status[0] == full.status[k]
        np.testing.assert_array_equal(one.z[0], full.z[k])


def test_status_codes_in_batch():
    A = np.array([[[1.0, 1.0]], [[1.0, -1.0]], [[1.0, 1.0]]])
    b = np.array([[-1.0], [1.0], [2.0]])
    res = simplex_arrays(np.array([1.0, 0.0]), A, b)
    assert list(res.status) == [INFEASIBLE, UNBOUNDED, OPTIMAL]
    # Farkas certificate: u.A <= 0, u.b > 0
    u = res.farkas[0]
    assert np.all(u @ A[0] <= 1e-12) and u @ b[0] > 0


def test_degenerate_cycling_example_terminates():
    # Beale's classic cycling example
    c = np.array([0.75, -150, 0.02, -6, 0, 0, 0])
    A = np.array(
        [
            [0.25, -60, -0.04, 9, 1, 0, 0],
            [0.5, -90, -0.02, 3, 0, 1, 0],
            [0, 0, 1, 0, 0, 0, 1],
        ]
    )
    sol = solve(LinearProgram(c, A, [0, 0, 1]))
    assert sol.optimal
    assert sol.objective_value == pytest.approx(0.05)


def test_solve_batch_matches_solve(rng):
    lps = []
    for _ in range(4):
        A = np.vstack([rng.normal(size=(2, 5)), np.ones(5)])
        z0 = rng.uniform(0.1, 1, 5)
        lps.append(LinearProgram(rng.normal(size=5), A, A @ z0))
    for lp, sol in zip(lps, solve_batch(lps)):
        assert sol.objective_value == pytest.approx(solve(lp).objective_value, abs=1e-12)


def test_rejects_bad_dimensions():
    with pytest.raises(ValueError):
        LinearProgram([1, 2], [[1, 2, 3]], [1])
    with pytest.raises(ValueError):
        LinearProgram([1.0], [[np.nan]], [1.0])
