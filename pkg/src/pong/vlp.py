"""Vertex-search LPs and the per-finger tangent polygons they define.

For finger i and tangent search direction d the longest admissible step is

    theta = min_j max { theta >= 0 : T_ij (theta d) = -W alpha_j,
                        alpha_j >= 0, 1'alpha_j = 1 }

one small LP per pyramid edge j.  The joint program that couples all edges
through a shared theta has the same optimum (:func:`joint_vertex_lp` is kept
as an oracle for that equivalence).  All (finger, direction, edge) programs
share one shape and are solved as a single batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .simplex import FAILURE, INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, simplex_arrays, solve
from .wrench import LPError, WrenchModel

THETA_CAP_SIGMAS = 8.0


@dataclass(frozen=True)
class SearchDirections:
    dirs: np.ndarray  # (n_v, 2) unit vectors, counterclockwise

    def __post_init__(self):
        d = np.asarray(self.dirs, dtype=float).reshape(-1, 2)
        if len(d) < 3:
            raise ValueError("need at least three search directions")
        if np.any(np.abs(np.linalg.norm(d, axis=1) - 1) > 1e-12):
            raise ValueError("search directions must be unit vectors")
        ang = np.mod(np.arctan2(d[:, 1], d[:, 0]), 2 * np.pi)
        if np.any(np.diff(ang) <= 0):
            raise ValueError("search directions must have strictly increasing angles in [0, 2pi)")
        object.__setattr__(self, "dirs", d)

    @property
    def n_dirs(self) -> int:
        return len(self.dirs)

    @classmethod
    def uniform(cls, n_dirs: int = 8) -> "SearchDirections":
        a = 2 * np.pi * np.arange(n_dirs) / n_dirs
        return cls(np.stack([np.cos(a), np.sin(a)], axis=1))


@dataclass
class TangentPolygon:
    vertices: np.ndarray  # (n_v, 2), counterclockwise
    sigmas: np.ndarray
    thetas: np.ndarray
    capped_flags: np.ndarray
    mean: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def to_dict(self) -> dict:
        return {
            "vertices": self.vertices.tolist(),
            "sigmas": self.sigmas.tolist(),
            "thetas": self.thetas.tolist(),
            "capped": [bool(c) for c in self.capped_flags],
            "mean": self.mean.tolist(),
        }


def lift(model: WrenchModel, finger: int, direction) -> np.ndarray:
    """Tangent-plane coordinates -> 3D perturbation direction."""
    return direction[0] * model.tangents[finger, 0] + direction[1] * model.tangents[finger, 1]


def theta_caps(sigmas) -> np.ndarray:
    s = np.asarray(sigmas, dtype=float).reshape(-1, 2)
    return THETA_CAP_SIGMAS * s.max(axis=1)


@dataclass
class VertexSolve:
    """Every per-edge LP for every (finger, direction).

    Arrays are indexed (finger, direction, edge).  ``theta_edge`` is +inf
    for unbounded programs and nan for infeasible ones.
    """

    theta_edge: np.ndarray
    status: np.ndarray
    z: np.ndarray  # (n_f, n_v, n_s, 1 + n_w)
    basis: np.ndarray  # (n_f, n_v, n_s, 7)
    A: np.ndarray  # (n_f, n_v, n_s, 7, 1 + n_w)
    theta_lp: np.ndarray  # (n_f, n_v)  min over edges
    argmin_edge: np.ndarray  # (n_f, n_v)
    feasible: bool


def _edge_programs(model: WrenchModel, dirs3: np.ndarray) -> np.ndarray:
    """Constraint matrices for all edge LPs; dirs3 is (n_f, n_v, 3)."""
    n_f, n_s = model.n_fingers, model.n_sides
    n_v = dirs3.shape[1]
    n_w = model.n_w
    A = np.zeros((n_f, n_v, n_s, 7, 1 + n_w))
    A[..., :6, 0] = np.einsum("ijab,ikb->ikja", model.t_maps, dirs3)
    A[..., :6, 1:] = model.w_bar
    A[..., 6, 1:] = 1.0
    return A


def solve_vertices(model: WrenchModel, dirs: SearchDirections) -> VertexSolve:
    n_f, n_s = model.n_fingers, model.n_sides
    n_v = dirs.n_dirs
    dirs3 = np.einsum("ka,iab->ikb", dirs.dirs, model.tangents)
    A = _edge_programs(model, dirs3)
    m, n = A.shape[-2:]
    flatA = A.reshape(-1, m, n)
    b = np.zeros((flatA.shape[0], m))
    b[:, 6] = 1.0
    c = np.zeros(n)
    c[0] = 1.0
    res = simplex_arrays(c, flatA, b)
    st = res.status.reshape(n_f, n_v, n_s)
    if np.any(st == FAILURE):
        raise LPError("a vertex LP failed numerically")
    theta = np.where(st == OPTIMAL, res.z[:, 0].reshape(n_f, n_v, n_s), np.nan)
    theta[st == UNBOUNDED] = np.inf
    feasible = not np.any(st == INFEASIBLE)
    if feasible:
        arg = np.argmin(theta, axis=2)
        tlp = np.take_along_axis(theta, arg[..., None], axis=2)[..., 0]
    else:
        arg = np.zeros((n_f, n_v), dtype=int)
        tlp = np.zeros((n_f, n_v))
    return VertexSolve(
        theta,
        st,
        res.z.reshape(n_f, n_v, n_s, n),
        res.basis.reshape(n_f, n_v, n_s, m),
        A,
        tlp,
        arg,
        feasible,
    )


def solve_vertex(model: WrenchModel, finger: int, direction, theta_max: float):
    """One search direction of one finger.  Returns (theta, feasible, capped)."""
    d = np.asarray(direction, dtype=float).reshape(1, 2)
    dirs3 = np.einsum("ka,ab->kb", d, model.tangents[finger])[None]
    sub = WrenchModel(
        model.w_bar,
        model.t_maps[finger : finger + 1],
        model.generators[finger : finger + 1],
        model.torque_origin,
        model.mu,
        model.positions[finger : finger + 1],
        model.mean_normals[finger : finger + 1],
        model.tangents[finger : finger + 1],
    )
    A = _edge_programs(sub, dirs3).reshape(-1, 7, 1 + model.n_w)
    b = np.zeros((len(A), 7))
    b[:, 6] = 1.0
    c = np.zeros(1 + model.n_w)
    c[0] = 1.0
    res = simplex_arrays(c, A, b)
    if np.any(res.status == FAILURE):
        raise LPError("a vertex LP failed numerically")
    if np.any(res.status == INFEASIBLE):
        return 0.0, False, False
    th = np.where(res.status == UNBOUNDED, np.inf, res.z[:, 0]).min()
    if th >= theta_max:
        return float(theta_max), True, True
    return float(th), True, False


def joint_vertex_lp(model: WrenchModel, finger: int, direction) -> tuple[float, str]:
    """All pyramid edges coupled through one theta, solved as a single LP."""
    d3 = lift(model, finger, np.asarray(direction, dtype=float))
    n_s, n_w = model.n_sides, model.n_w
    rows = 7 * n_s
    cols = 1 + n_s * n_w
    A = np.zeros((rows, cols))
    b = np.zeros(rows)
    for j in range(n_s):
        r = 7 * j
        A[r : r + 6, 0] = model.t_maps[finger, j] @ d3
        A[r : r + 6, 1 + j * n_w : 1 + (j + 1) * n_w] = model.w_bar
        A[r + 6, 1 + j * n_w : 1 + (j + 1) * n_w] = 1.0
        b[r + 6] = 1.0
    c = np.zeros(cols)
    c[0] = 1.0
    sol = solve(LinearProgram(c, A, b))
    if sol.status.value == "unbounded":
        return float("inf"), sol.status.value
    return (float(sol.z_star[0]) if sol.optimal else float("nan")), sol.status.value


def assemble_polygons(vs: VertexSolve, dirs: SearchDirections, sigmas) -> list[TangentPolygon]:
    caps = theta_caps(sigmas)
    polys = []
    for i in range(vs.theta_lp.shape[0]):
        th = vs.theta_lp[i]
        capped = th >= caps[i]
        th = np.where(capped, caps[i], th)
        polys.append(TangentPolygon(th[:, None] * dirs.dirs, np.asarray(sigmas[i], dtype=float), th, capped))
    return polys


def build_polygons(model: WrenchModel, grasp, dirs: SearchDirections | None = None):
    """Per-finger polygons.  Returns (polygons or None, all_feasible, VertexSolve)."""
    dirs = dirs or SearchDirections.uniform(grasp.n_dirs)
    vs = solve_vertices(model, dirs)
    if not vs.feasible:
        return None, False, vs
    sig = np.array([c.sigmas for c in grasp.contacts])
    return assemble_polygons(vs, dirs, sig), True, vs
