"""The lower bound L_fc on the probability of force closure and its gradient.

Pipeline: mean basis wrenches -> min-weight gate -> vertex LPs -> one tangent
polygon per finger -> Gaussian mass of each polygon -> product.

The analytic gradient chains three pieces:

* the quadrature sum differentiated at fixed nodes w.r.t. polygon vertices
  and sigmas,
* fixed-basis LP sensitivity for every vertex step theta,
* derivatives of the contact distributions w.r.t. contact position.

For a vertex LP with optimal basis B, ``A z = b`` gives
``d theta = -y' (dA) z`` with ``y = A_B^-T e_theta`` the LP dual.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .gausspoly import PlanarGaussian, QuadratureConfig, integrate, polygon_probability_grad
from .vlp import THETA_CAP_SIGMAS, SearchDirections, assemble_polygons, solve_vertices
from .wrench import build_wrench_model, min_weight_metric

TIE_TOL = 1e-8
BASIS_TOL = 1e-10
AMBIGUITY_TOL = 1e-6


class DegenerateGradientError(ArithmeticError):
    """The analytic gradient does not exist or is ill-conditioned here.

    Fall back to :func:`finite_difference_gradient`.
    """


@dataclass
class BoundReport:
    l_fc: float
    per_finger_probs: list
    feasible: bool
    l_bar_star: float
    polygons: list | None = None
    gradient: np.ndarray | None = None
    timing: dict = field(default_factory=dict)

    def to_dict(self, include_polygons: bool = False, include_timing: bool = True) -> dict:
        out = {
            "l_fc": self.l_fc,
            "per_finger_probs": list(self.per_finger_probs),
            "feasible": self.feasible,
            "l_bar_star": self.l_bar_star,
        }
        if self.gradient is not None:
            out["gradient"] = np.asarray(self.gradient).tolist()
        if include_polygons and self.polygons is not None:
            out["polygons"] = [p.to_dict() for p in self.polygons]
        if include_timing:
            out["timing"] = dict(self.timing)
        return out


@dataclass
class _State:
    model: object
    mw: object
    vs: object
    dirs: SearchDirections
    polygons: list | None
    probs: np.ndarray


def _pipeline(grasp, cfg: QuadratureConfig, dirs: SearchDirections, timing: dict) -> _State:
    t0 = time.perf_counter()
    model = build_wrench_model(grasp)
    mw = min_weight_metric(model.w_bar)
    t1 = time.perf_counter()
    timing["wrench"] = t1 - t0
    zeros = np.zeros(grasp.n_fingers)
    if not mw.feasible:
        return _State(model, mw, None, dirs, None, zeros)
    vs = solve_vertices(model, dirs)
    t2 = time.perf_counter()
    timing["vertex_lp"] = t2 - t1
    if not vs.feasible:
        return _State(model, mw, vs, dirs, None, zeros)
    sig = np.array([c.sigmas for c in grasp.contacts])
    polys = assemble_polygons(vs, dirs, sig)
    probs = np.array([integrate(PlanarGaussian(tuple(p.sigmas)), p.vertices, cfg).probability for p in polys])
    timing["integrate"] = time.perf_counter() - t2
    return _State(model, mw, vs, dirs, polys, probs)


def evaluate(
    grasp,
    cfg: QuadratureConfig | None = None,
    dirs: SearchDirections | None = None,
    with_gradient: bool = False,
    free_fingers=None,
) -> BoundReport:
    """L_fc of a grasp; numerical LP failures propagate as ``LPError``."""
    cfg = cfg or QuadratureConfig()
    dirs = dirs or SearchDirections.uniform(grasp.n_dirs)
    timing: dict = {}
    st = _pipeline(grasp, cfg, dirs, timing)
    feasible = st.polygons is not None
    l_fc = float(np.prod(st.probs)) if feasible else 0.0
    rep = BoundReport(l_fc, st.probs.tolist(), feasible, st.mw.l_bar_star, st.polygons, timing=timing)
    if with_gradient:
        t = time.perf_counter()
        rep.gradient = _gradient_from_state(grasp, st, cfg, free_fingers)
        timing["gradient"] = time.perf_counter() - t
    return rep


def l_fc(grasp, cfg=None, dirs=None) -> float:
    return evaluate(grasp, cfg, dirs).l_fc


# ---------------------------------------------------------------------------
# gradient


def _leave_one_out_products(p: np.ndarray) -> np.ndarray:
    out = np.empty_like(p)
    for i in range(len(p)):
        out[i] = np.prod(np.delete(p, i))
    return out


def _lp_dual(A: np.ndarray, z: np.ndarray, basis: np.ndarray):
    """LP dual at the optimum plus the directions along which the optimum is ambiguous.

    Returns ``(y, dual_dirs, primal_dirs)``: ``dual_dirs`` spans the left null
    space of the columns carrying positive weight (other duals agree with the
    primal there), ``primal_dirs`` spans the null space of the columns with
    zero reduced cost (other optimal z).  The caller decides whether either
    ambiguity changes the derivative.
    """
    m, n = A.shape
    if np.any(basis >= n):
        raise DegenerateGradientError("vertex LP basis keeps an artificial variable")
    AB = A[:, basis]
    if np.linalg.cond(AB) > 1e12:
        raise DegenerateGradientError("vertex LP basis is ill-conditioned")
    r = np.nonzero(basis == 0)[0]
    if len(r) != 1:
        raise DegenerateGradientError("theta left the optimal basis")
    e = np.zeros(m)
    e[r[0]] = 1.0
    y = np.linalg.solve(AB.T, e)
    c = np.zeros(n)
    c[0] = 1.0
    reduced = c - A.T @ y
    scale = max(1.0, np.abs(y).max() * np.abs(A).max())
    active = np.abs(reduced) <= BASIS_TOL * scale
    active[basis] = True
    support = z > BASIS_TOL * max(1.0, z.max())

    def svd_rank(M):
        u, sv, vt = np.linalg.svd(M)
        return u, vt, int(np.sum(sv > 1e-9 * max(sv[0], 1e-300)))

    u, _, rank = svd_rank(A[:, support])
    dual_dirs = u[:, rank:].T
    _, vt, rank = svd_rank(A[:, active])
    pd = vt[rank:]
    primal_dirs = np.zeros((len(pd), n))
    primal_dirs[:, active] = pd
    if np.any(np.abs(primal_dirs[:, 0]) > 1e-9):
        raise DegenerateGradientError("vertex LP optimum value is not locally unique")
    return y, dual_dirs, primal_dirs


class _Accum:
    """Gradient buffers for every raw parameter of every finger."""

    def __init__(self, n_f: int):
        self.x = np.zeros((n_f, 3))
        self.n = np.zeros((n_f, 3))
        self.t = np.zeros((n_f, 2, 3))
        self.sigma = np.zeros((n_f, 2))
        self.origin = np.zeros(3)


def _theta_gradient(model, i, dir2, j, theta, alpha, y6, weight, acc: _Accum):
    """Add ``weight * d theta`` for vertex (i, dir2) with active edge j.

    ``d theta = -y6 . (theta d(T_ij d) + sum_l alpha_l d w_l)``.
    """
    mu = model.mu
    o = model.torque_origin
    n_s = model.n_sides
    ang = 2.0 * np.pi * np.arange(n_s) / n_s
    uf, ut = y6[:3], y6[3:]
    s = -weight

    # direction term
    r = model.positions[i] - o
    psi = uf + np.cross(ut, r)
    g = model.generators[i, j]
    t1, t2 = model.tangents[i]
    d = dir2[0] * t1 + dir2[1] * t2
    h = d + mu * np.cross(g, d)
    gx = np.cross(h, ut)
    gd = psi + mu * np.cross(psi, g)
    gg = mu * np.cross(d, psi)
    acc.x[i] += s * theta * gx
    acc.origin -= s * theta * gx
    acc.t[i, 0] += s * theta * (dir2[0] * gd + np.cos(ang[j]) * gg)
    acc.t[i, 1] += s * theta * (dir2[1] * gd + np.sin(ang[j]) * gg)

    # mean basis wrench terms
    for f in range(model.n_fingers):
        r = model.positions[f] - o
        psi = uf + np.cross(ut, r)
        nb = model.mean_normals[f]
        for jj in range(n_s):
            a = alpha[f * n_s + jj]
            if a == 0.0:
                continue
            g = model.generators[f, jj]
            fvec = nb + mu * np.cross(g, nb)
            gx = np.cross(fvec, ut)
            acc.x[f] += s * a * gx
            acc.origin -= s * a * gx
            acc.n[f] += s * a * (psi + mu * np.cross(psi, g))
            gg = mu * np.cross(nb, psi)
            acc.t[f, 0] += s * a * np.cos(ang[jj]) * gg
            acc.t[f, 1] += s * a * np.sin(ang[jj]) * gg


def _chain(acc: _Accum, jacs) -> np.ndarray:
    """Raw-parameter gradient -> (n_f + 2, 3).

    Rows are the contact positions, the torque origin, and the rigid
    translation of surface, contacts and origin together (which leaves
    normals, frames and sigmas unchanged, so only direct terms remain).
    """
    out = np.empty((len(jacs) + 2, 3))
    for i, jac in enumerate(jacs):
        g = acc.x[i].copy()
        g += acc.n[i] @ jac.d_normal
        g += np.einsum("ab,abk->k", acc.t[i], jac.d_tangent)
        g += acc.sigma[i] @ jac.d_sigma
        out[i] = g
    out[-2] = acc.origin
    out[-1] = acc.x.sum(axis=0) + acc.origin
    return out


def _vertex_gradient(model, jacs, i, d2, j, z, A, basis) -> np.ndarray:
    """d theta / d(positions, origin) for one uncapped vertex."""
    y, dual_dirs, primal_dirs = _lp_dual(A, z, basis)
    acc = _Accum(model.n_fingers)
    _theta_gradient(model, i, d2, j, z[0], z[1:], y[:6], 1.0, acc)
    g = _chain(acc, jacs)
    ref = max(np.abs(g).max(), 1e-300)
    ynorm = np.linalg.norm(y)
    for dy in dual_dirs:
        acc = _Accum(model.n_fingers)
        _theta_gradient(model, i, d2, j, z[0], z[1:], ynorm * dy[:6], 1.0, acc)
        if np.abs(_chain(acc, jacs)).max() > AMBIGUITY_TOL * ref:
            raise DegenerateGradientError("vertex LP dual is not unique and the derivative depends on it")
    znorm = np.linalg.norm(z)
    for v in primal_dirs:
        acc = _Accum(model.n_fingers)
        _theta_gradient(model, i, d2, j, 0.0, znorm * v[1:], y[:6], 1.0, acc)
        if np.abs(_chain(acc, jacs)).max() > AMBIGUITY_TOL * ref:
            raise DegenerateGradientError("vertex LP has several optima and the derivative depends on the choice")
    return g


def _sigma_of_max(sig: np.ndarray, jac, i: int) -> np.ndarray:
    """d max(sigma) / d sigma for a capped vertex."""
    w = np.zeros(2)
    if abs(sig[0] - sig[1]) <= 1e-12 * sig.max():
        d = jac.d_sigma
        if np.abs(d[0] - d[1]).max() > 1e-9 * max(1.0, np.abs(d).max()):
            raise DegenerateGradientError(f"finger {i}: capped step depends on the max of two equal sigmas")
        w[:] = 0.5
    else:
        w[int(np.argmax(sig))] = 1.0
    return w


def _position_gradient(grasp, st: _State, cfg: QuadratureConfig) -> np.ndarray:
    """dL_fc / d(positions, origin, rigid translation) as an (n_f + 2, 3) array."""
    model, vs, dirs = st.model, st.vs, st.dirs
    n_f = grasp.n_fingers
    jacs = [m.jacobian(c.position)[1] for m, c in zip(grasp.models, grasp.contacts)]
    others = _leave_one_out_products(st.probs)
    total = np.zeros((n_f + 2, 3))
    acc = _Accum(n_f)
    for i, poly in enumerate(st.polygons):
        sig = np.asarray(poly.sigmas)
        _, dv, ds = polygon_probability_grad(PlanarGaussian(tuple(sig)), poly.vertices, cfg)
        acc.sigma[i] += others[i] * ds
        cap = THETA_CAP_SIGMAS * sig.max()
        for k, d2 in enumerate(dirs.dirs):
            dp_dtheta = others[i] * float(dv[k] @ d2)
            if dp_dtheta == 0.0:
                continue
            theta_lp = vs.theta_lp[i, k]
            if abs(theta_lp - cap) <= TIE_TOL * cap:
                raise DegenerateGradientError(f"finger {i} direction {k}: theta sits on its cap")
            if poly.capped_flags[k]:
                acc.sigma[i] += dp_dtheta * THETA_CAP_SIGMAS * _sigma_of_max(sig, jacs[i], i)
                continue
            j = int(vs.argmin_edge[i, k])
            te = vs.theta_edge[i, k]
            col = vs.A[i, k, :, :, 0]
            for jj in range(len(te)):
                # edges whose step direction maps identically share one LP
                same = np.abs(col[jj] - col[j]).max() <= 1e-14 * max(1.0, np.abs(col[j]).max())
                if jj != j and not same and te[jj] - theta_lp <= TIE_TOL * max(1.0, theta_lp):
                    raise DegenerateGradientError(f"finger {i} direction {k}: two pyramid edges tie")
            total += dp_dtheta * _vertex_gradient(
                model, jacs, i, d2, j, vs.z[i, k, j], vs.A[i, k, j], vs.basis[i, k, j]
            )
    total += _chain(acc, jacs)
    return total


def _select(grad: np.ndarray, free_fingers) -> np.ndarray:
    if free_fingers is None:
        return grad.reshape(-1)
    return grad[list(free_fingers)].reshape(-1)


def _gradient_from_state(grasp, st: _State, cfg, free_fingers, with_origin: bool = False):
    from .surfaces import DomainError

    n_f = grasp.n_fingers
    if st.polygons is None:
        full = np.zeros((n_f + 2, 3))
    else:
        try:
            full = _position_gradient(grasp, st, cfg)
        except DomainError as exc:
            raise DegenerateGradientError(str(exc)) from exc
    sel = _select(full[:n_f], free_fingers)
    return (sel, full[n_f].copy(), full[n_f + 1].copy()) if with_origin else sel


def gradient(grasp, free_fingers=None, cfg=None, dirs=None, with_origin: bool = False):
    """Analytic dL_fc / d(contact coordinates), flattened finger-major.

    ``free_fingers`` selects which contacts' coordinates are returned (all
    by default).  With ``with_origin`` two more 3-vectors are returned: the
    derivative w.r.t. the torque origin and w.r.t. a rigid translation of
    surface, contacts and origin together.  Zero when the grasp is infeasible.
    Raises :class:`DegenerateGradientError` where the bound is not
    differentiable or the principal directions are ill-posed.
    """
    cfg = cfg or QuadratureConfig()
    dirs = dirs or SearchDirections.uniform(grasp.n_dirs)
    st = _pipeline(grasp, cfg, dirs, {})
    return _gradient_from_state(grasp, st, cfg, free_fingers, with_origin)


def finite_difference_gradient(grasp, free_fingers=None, cfg=None, dirs=None, h: float = 1e-5) -> np.ndarray:
    """Central differences of L_fc w.r.t. contact coordinates."""
    cfg = cfg or QuadratureConfig()
    dirs = dirs or SearchDirections.uniform(grasp.n_dirs)
    fingers = range(grasp.n_fingers) if free_fingers is None else list(free_fingers)
    base = grasp.positions
    out = []
    for i in fingers:
        for k in range(3):
            xp, xm = base.copy(), base.copy()
            xp[i, k] += h
            xm[i, k] -= h
            fp = evaluate(grasp.moved(xp), cfg, dirs).l_fc
            fm = evaluate(grasp.moved(xm), cfg, dirs).l_fc
            out.append((fp - fm) / (2 * h))
    return np.array(out)

