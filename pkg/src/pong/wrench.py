"""Friction pyramids, basis wrenches and hull tests.

Basis force for finger i, pyramid edge j::

    f_ij = n_i + mu * (g_ij x n_i)

with unit generators g_ij spread evenly by angle in the finger's tangent
basis.  Stacking force over torque about the torque origin gives the
wrench ``w_ij = T_ij n_i`` where ``T_ij`` is linear in the normal.  Using
the *mean* generators for random normals keeps the map linear and keeps
every random basis force inside the Coulomb cone of its own normal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simplex import FAILURE, INFEASIBLE, OPTIMAL, simplex_arrays


class LPError(RuntimeError):
    """An LP the bound depends on failed numerically."""


def skew(v) -> np.ndarray:
    """Matrix [v]x with [v]x b = v x b."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


@dataclass(frozen=True)
class FrictionModel:
    mu: float = 0.5
    n_sides: int = 4

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.n_sides < 1:
            raise ValueError("n_sides must be positive")


@dataclass
class WrenchModel:
    """Mean basis wrenches and the linear maps producing random ones.

    Columns of ``w_bar`` are ordered finger-major: l = i * n_sides + j.
    """

    w_bar: np.ndarray  # (6, n_w)
    t_maps: np.ndarray  # (n_f, n_s, 6, 3)
    generators: np.ndarray  # (n_f, n_s, 3)
    torque_origin: np.ndarray
    mu: float
    positions: np.ndarray  # (n_f, 3)
    mean_normals: np.ndarray  # (n_f, 3)
    tangents: np.ndarray  # (n_f, 2, 3)

    @property
    def n_fingers(self) -> int:
        return self.t_maps.shape[0]

    @property
    def n_sides(self) -> int:
        return self.t_maps.shape[1]

    @property
    def n_w(self) -> int:
        return self.w_bar.shape[1]


def generator_angles(n_sides: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n_sides) / n_sides


def edge_map(position, generator, mu, origin) -> np.ndarray:
    """6x3 map T taking a normal to the basis wrench of one pyramid edge."""
    top = np.eye(3) + mu * skew(generator)
    return np.vstack([top, skew(np.asarray(position) - origin) @ top])


def build_wrench_model(grasp) -> WrenchModel:
    mu, n_s = grasp.mu, grasp.n_sides
    origin = grasp.torque_origin
    ang = generator_angles(n_s)
    n_f = grasp.n_fingers
    T = np.empty((n_f, n_s, 6, 3))
    G = np.empty((n_f, n_s, 3))
    W = np.empty((6, n_f * n_s))
    for i, c in enumerate(grasp.contacts):
        t1, t2 = c.tangent_basis
        for j in range(n_s):
            g = np.cos(ang[j]) * t1 + np.sin(ang[j]) * t2
            G[i, j] = g
            T[i, j] = edge_map(c.position, g, mu, origin)
            W[:, i * n_s + j] = T[i, j] @ c.mean_normal
    return WrenchModel(
        W,
        T,
        G,
        origin.copy(),
        mu,
        grasp.positions,
        np.array([c.mean_normal for c in grasp.contacts]),
        np.array([c.tangent_basis for c in grasp.contacts]),
    )


def random_wrenches(model: WrenchModel, normals) -> np.ndarray:
    """Basis wrenches for given normals using the mean generators.

    ``normals`` is (n_f, 3) or a batch (S, n_f, 3); the result is (6, n_w)
    or (S, 6, n_w).
    """
    n = np.asarray(normals, dtype=float)
    out = np.einsum("ijab,...ib->...aij", model.t_maps, n)
    return out.reshape(out.shape[:-2] + (model.n_w,))


# ---------------------------------------------------------------------------
# hull membership


@dataclass
class HullTest:
    contains: np.ndarray  # bool
    indeterminate: np.ndarray  # bool, solver result could not be certified
    weights: np.ndarray  # convex weights for contained cases


def _hull_system(W: np.ndarray):
    B, _, n = W.shape
    A = np.concatenate([W, np.ones((B, 1, n))], axis=1)
    b = np.zeros((B, A.shape[1]))
    b[:, -1] = 1.0
    return A, b


def hull_contains_origin(W, chunk: int = 20000) -> HullTest:
    """Decide 0 in conv(columns of W) for one (d, n) matrix or a (B, d, n) stack.

    Each decision comes with a certificate that is re-checked here: convex
    weights reproducing the origin, or a strictly separating hyperplane from
    the phase-1 Farkas multipliers.  Uncertified results are flagged
    indeterminate rather than guessed.
    """
    W = np.asarray(W, dtype=float)
    single = W.ndim == 2
    if single:
        W = W[None]
    B, d, n = W.shape
    contains = np.zeros(B, bool)
    indet = np.zeros(B, bool)
    weights = np.zeros((B, n))
    for s in range(0, B, chunk):
        Wc = W[s : s + chunk]
        A, b = _hull_system(Wc)
        res = simplex_arrays(np.zeros(n), A, b, phase1_only=True)
        c, u, w = _certify(Wc, res.status, res.z, res.farkas)
        contains[s : s + chunk] = c
        indet[s : s + chunk] = u
        weights[s : s + chunk] = w
    if single:
        return HullTest(contains[:1], indet[:1], weights[:1])
    return HullTest(contains, indet, weights)


def _certify(W, status, z, farkas):
    scale = np.maximum(np.abs(W).max(axis=(1, 2)), 1e-300)
    n = W.shape[2]
    feas = status == OPTIMAL
    resid = np.abs(np.einsum("bdn,bn->bd", W, z)).max(axis=1)
    ok_feas = feas & (z.min(axis=1) >= -1e-12) & (np.abs(z.sum(axis=1) - 1) <= 1e-9) & (resid <= 1e-8 * scale)
    infeas = status == INFEASIBLE
    a = farkas[:, :-1]
    margin = np.einsum("bd,bdn->bn", a, W).max(axis=1)
    anorm = np.linalg.norm(a, axis=1)
    ok_inf = infeas & (margin < -1e-12 * anorm * scale)
    contains = ok_feas
    indet = ~(ok_feas | ok_inf)
    weights = np.where(ok_feas[:, None], z, 0.0)
    return contains, indet, weights


# ---------------------------------------------------------------------------
# min-weight metric


@dataclass
class MinWeight:
    l_bar_star: float
    feasible: bool
    alpha: np.ndarray | None
    rank: int


def min_weight_metric(w_bar) -> MinWeight:
    """Normalized min-weight metric of the mean basis wrenches.

    Solves ``max min_l alpha_l`` over convex weights with ``W alpha = 0`` and
    scales by n_w so that uniform weights score 1.  Feasibility also needs
    the wrenches to span the full wrench space: a rank-deficient W keeps the
    origin on the boundary of its (flat) hull, which is never force closure.
    """
    W = np.asarray(w_bar, dtype=float)
    d, n = W.shape
    scale = max(np.abs(W).max(), 1e-300)
    rank = int(np.linalg.matrix_rank(W, tol=1e-9 * scale))
    # alpha = t * 1 + beta with beta >= 0, t >= 0
    A = np.zeros((d + 1, n + 1))
    A[:d, :n] = W
    A[:d, n] = W.sum(axis=1)
    A[d, :n] = 1.0
    A[d, n] = n
    b = np.zeros(d + 1)
    b[d] = 1.0
    c = np.zeros(n + 1)
    c[n] = 1.0
    res = simplex_arrays(c[None], A[None], b[None])
    st = int(res.status[0])
    if st == FAILURE:
        raise LPError("min-weight LP failed numerically")
    if st == INFEASIBLE or rank < d:
        return MinWeight(0.0, False, None, rank)
    if st != OPTIMAL:
        raise LPError(f"min-weight LP returned unexpected status code {st}")
    z = res.z[0]
    t = z[n]
    return MinWeight(float(n * t), True, z[:n] + t, rank)
