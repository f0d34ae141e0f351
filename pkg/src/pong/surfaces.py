"""Analytic implicit surfaces and curvature-derived normal uncertainty.

Every shape is evaluated through a third-order jet (value, gradient,
Hessian, third-derivative tensor), composed with the chain rule.  Nothing
is differenced numerically.

Conventions
-----------
``s(x) < 0`` inside the object and ``s(x) = 0`` on its surface.  The mean
contact normal is ``-grad s`` and therefore points into the object.

Shapes and their JSON ``params``::

    sphere        {"radius": r}
    ellipsoid     {"radii": [a, b, c]}
    superquadric  {"radii": [a, b, c], "exponents": [e1, e2]}
    rounded_box   {"half_extents": [hx, hy, hz], "radius": rho}

Any shape also accepts ``"scale": c`` which multiplies ``s`` by ``c > 0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

KINDS = ("sphere", "ellipsoid", "superquadric", "rounded_box")

# superquadric coordinates closer than this to an axis plane are rejected
AXIS_TOL = 1e-6
UMBILIC_TOL = 1e-10
EIG_GAP_TOL = 1e-6


class DomainError(ValueError):
    """Raised at points where a surface is not smooth or has zero gradient."""


# ---------------------------------------------------------------------------
# third-order jets of scalar functions on R^3


@dataclass
class _Jet:
    v: float
    g: np.ndarray
    H: np.ndarray
    K: np.ndarray

    def __add__(self, other: "_Jet") -> "_Jet":
        return _Jet(self.v + other.v, self.g + other.g, self.H + other.H, self.K + other.K)

    def compose(self, f0, f1, f2, f3) -> "_Jet":
        """Jet of phi(u) given phi and its first three derivatives at u."""
        g, H = self.g, self.H
        ggg = np.einsum("i,j,k->ijk", g, g, g)
        Hg = np.einsum("ij,k->ijk", H, g)
        sym = Hg + Hg.transpose(0, 2, 1) + Hg.transpose(2, 1, 0)
        return _Jet(f0, f1 * g, f2 * np.outer(g, g) + f1 * H, f3 * ggg + f2 * sym + f1 * self.K)

    def power(self, q: float) -> "_Jet":
        u = self.v
        if u <= 0.0 or (float(q).is_integer() and q >= 0):
            if float(q).is_integer() and q >= 0:
                # polynomial power, smooth through zero
                qi = int(q)
                f = [u**qi if qi >= 0 else 0.0]
                f.append(qi * u ** (qi - 1) if qi >= 1 else 0.0)
                f.append(qi * (qi - 1) * u ** (qi - 2) if qi >= 2 else 0.0)
                f.append(qi * (qi - 1) * (qi - 2) * u ** (qi - 3) if qi >= 3 else 0.0)
                return self.compose(*f)
            raise DomainError("non-smooth power of a nonpositive quantity")
        return self.compose(u**q, q * u ** (q - 1), q * (q - 1) * u ** (q - 2), q * (q - 1) * (q - 2) * u ** (q - 3))

    def scaled(self, a: float, shift: float = 0.0) -> "_Jet":
        return _Jet(a * self.v + shift, a * self.g, a * self.H, a * self.K)


def _zero_jet() -> _Jet:
    return _Jet(0.0, np.zeros(3), np.zeros((3, 3)), np.zeros((3, 3, 3)))


def _coord_abs_power(y: np.ndarray, k: int, a: float, p: float) -> _Jet:
    """Jet of |y_k / a|**p."""
    u = y[k] / a
    even = float(p).is_integer() and int(p) % 2 == 0
    if even:
        pi = int(p)
        f0, f1 = u**pi, pi * u ** (pi - 1)
        f2 = pi * (pi - 1) * u ** (pi - 2)
        f3 = pi * (pi - 1) * (pi - 2) * u ** (pi - 3) if pi >= 3 else 0.0
    else:
        au = abs(u)
        if au < AXIS_TOL:
            raise DomainError(f"coordinate {k} too close to an axis plane for exponent {p:g}")
        sg = np.sign(u)
        f0 = au**p
        f1 = p * au ** (p - 1) * sg
        f2 = p * (p - 1) * au ** (p - 2)
        f3 = p * (p - 1) * (p - 2) * au ** (p - 3) * sg
    jet = _zero_jet()
    jet.v = f0
    jet.g[k] = f1 / a
    jet.H[k, k] = f2 / a**2
    jet.K[k, k, k] = f3 / a**3
    return jet


def _plus_part_fourth(y: np.ndarray, k: int, c: float) -> _Jet:
    """Jet of max(|y_k| - c, 0)**4 (three times continuously differentiable)."""
    jet = _zero_jet()
    u = abs(y[k]) - c
    if u <= 0.0:
        return jet
    sg = np.sign(y[k])
    jet.v = u**4
    jet.g[k] = 4 * u**3 * sg
    jet.H[k, k] = 12 * u**2
    jet.K[k, k, k] = 24 * u * sg
    return jet


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ImplicitSurface:
    kind: str
    params: dict
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown surface kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        p = dict(self.params)
        object.__setattr__(self, "params", p)
        if p.get("scale", 1.0) <= 0:
            raise ValueError("scale must be positive")
        if self.kind == "sphere":
            if p["radius"] <= 0:
                raise ValueError("radius must be positive")
        elif self.kind in ("ellipsoid", "superquadric"):
            if len(p["radii"]) != 3 or min(p["radii"]) <= 0:
                raise ValueError("radii must be three positive numbers")
            if self.kind == "superquadric":
                e1, e2 = p["exponents"]
                if not (0 < e1 <= 2 and 0 < e2 <= 2):
                    raise ValueError("superquadric exponents must lie in (0, 2]")
        else:
            h = np.asarray(p["half_extents"], dtype=float)
            rho = float(p["radius"])
            if h.size != 3 or h.min() <= 0 or not (0 < rho <= h.min()):
                raise ValueError("rounded_box needs positive half_extents and 0 < radius <= min(half_extents)")

    # -- evaluation -------------------------------------------------------

    def _jet(self, x) -> _Jet:
        y = np.asarray(x, dtype=float).reshape(3) - self.center
        p = self.params
        if self.kind == "sphere":
            r = float(p["radius"])
            if not np.any(y):
                raise DomainError("the sphere's implicit function is not smooth at its center")
            acc = _coord_abs_power(y, 0, r, 2) + _coord_abs_power(y, 1, r, 2) + _coord_abs_power(y, 2, r, 2)
            jet = acc.power(0.5).scaled(r, -r)
        elif self.kind in ("ellipsoid", "superquadric"):
            a = [float(v) for v in p["radii"]]
            e1, e2 = p.get("exponents", (1.0, 1.0))
            if not np.any(y):
                raise DomainError("the gauge function is not smooth at the center")
            inner = _coord_abs_power(y, 0, a[0], 2 / e2) + _coord_abs_power(y, 1, a[1], 2 / e2)
            if inner.v <= 0.0 and not float(e2 / e1).is_integer():
                raise DomainError("point lies on the superquadric's polar axis")
            acc = inner.power(e2 / e1) + _coord_abs_power(y, 2, a[2], 2 / e1)
            L = min(a)
            jet = acc.power(e1 / 2).scaled(L, -L)
        else:
            h = np.asarray(p["half_extents"], dtype=float)
            rho = float(p["radius"])
            acc = _plus_part_fourth(y, 0, h[0] - rho) + _plus_part_fourth(y, 1, h[1] - rho)
            acc = acc + _plus_part_fourth(y, 2, h[2] - rho)
            if acc.v <= 0.0:
                raise DomainError("point is in the rounded box's flat interior core (zero gradient)")
            jet = acc.power(0.25).scaled(1.0, -rho)
        c = float(p.get("scale", 1.0))
        return jet.scaled(c) if c != 1.0 else jet

    def value(self, x) -> float:
        """s(x) alone.  Defined everywhere, including where derivatives are not."""
        y = np.asarray(x, dtype=float).reshape(3) - self.center
        p = self.params
        c = float(p.get("scale", 1.0))
        if self.kind == "sphere":
            r = float(p["radius"])
            return c * (float(np.linalg.norm(y)) - r)
        if self.kind in ("ellipsoid", "superquadric"):
            a = np.asarray(p["radii"], dtype=float)
            e1, e2 = p.get("exponents", (1.0, 1.0))
            u = np.abs(y / a)
            inner = u[0] ** (2 / e2) + u[1] ** (2 / e2)
            acc = inner ** (e2 / e1) + u[2] ** (2 / e1)
            L = float(a.min())
            return c * (L * acc ** (e1 / 2) - L)
        h = np.asarray(p["half_extents"], dtype=float)
        rho = float(p["radius"])
        q = np.maximum(np.abs(y) - (h - rho), 0.0)
        return c * (float(np.sum(q**4)) ** 0.25 - rho)

    def eval(self, x) -> tuple[float, np.ndarray, np.ndarray]:
        """Value, gradient and Hessian of s at x."""
        j = self._jet(x)
        return float(j.v), j.g, j.H

    def eval3(self, x) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
        """Like :meth:`eval` plus the third-derivative tensor."""
        j = self._jet(x)
        return float(j.v), j.g, j.H, j.K

    @property
    def umbilic_everywhere(self) -> bool:
        """True when every surface point is umbilic (spheres, equal-radius quadrics)."""
        if self.kind == "sphere":
            return True
        if self.kind == "ellipsoid":
            return len(set(map(float, self.params["radii"]))) == 1
        return False

    def locally_umbilic(self, x) -> bool:
        """True when x has a whole neighbourhood of umbilic points.

        That holds on spheres, on equal-radius ellipsoids and on the flat
        faces of a rounded box.  There the reference tangent frame is used
        and it is differentiable.
        """
        if self.umbilic_everywhere:
            return True
        if self.kind == "rounded_box":
            y = np.abs(np.asarray(x, dtype=float) - self.center)
            core = np.asarray(self.params["half_extents"], dtype=float) - float(self.params["radius"])
            return int(np.sum(y > core)) == 1
        return False

    # -- geometry helpers -------------------------------------------------

    def project(self, x, max_steps: int = 20, tol: float = 1e-10) -> np.ndarray:
        """Newton projection of x onto s = 0 along the gradient."""
        x = np.asarray(x, dtype=float).copy()
        for _ in range(max_steps):
            v, g, _ = self.eval(x)
            if abs(v) <= tol:
                break
            gg = g @ g
            if gg == 0.0:
                raise DomainError("zero gradient during projection")
            x = x - v * g / gg
        return x

    def ray_point(self, direction) -> np.ndarray:
        """Surface point hit by the ray from the center along ``direction``.

        All supported shapes are star-shaped about their center, so s is
        increasing along every such ray once outside the interior core.
        """
        u = np.asarray(direction, dtype=float)
        u = u / np.linalg.norm(u)
        lo, hi = 0.0, 1.0
        while self._inside(self.center + hi * u):
            lo, hi = hi, 2 * hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if hi - lo <= 1e-15 * hi:
                break
            if self._inside(self.center + mid * u):
                lo = mid
            else:
                hi = mid
        return self.project(self.center + 0.5 * (lo + hi) * u)

    def _inside(self, x) -> bool:
        return self.value(x) < 0

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {"kind": self.kind, "center": [float(v) for v in self.center], "params": _plain(self.params)}

    @classmethod
    def from_dict(cls, doc: dict) -> "ImplicitSurface":
        try:
            return cls(doc["kind"], dict(doc["params"]), doc.get("center", [0.0, 0.0, 0.0]))
        except KeyError as exc:
            raise ValueError(f"surface document missing field {exc}") from None


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def load_surface(path) -> ImplicitSurface:
    return ImplicitSurface.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class CurvatureParams:
    k_curv: float = 1.0
    eps: float = 1.05
    sigma_sq_min: float = 1e-4

    def __post_init__(self):
        if not (self.k_curv > 0 and self.eps > 0 and self.sigma_sq_min > 0):
            raise ValueError("k_curv, eps and sigma_sq_min must all be positive")


@dataclass(frozen=True)
class ContactDistribution:
    """One finger: contact point, inward mean normal, tangent basis, sigmas."""

    position: np.ndarray
    mean_normal: np.ndarray
    tangent_basis: np.ndarray  # rows t1, t2
    sigmas: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.position, dtype=float).reshape(3)
        n = np.asarray(self.mean_normal, dtype=float).reshape(3)
        t = np.asarray(self.tangent_basis, dtype=float).reshape(2, 3)
        s = np.asarray(self.sigmas, dtype=float).reshape(2)
        nn = np.linalg.norm(n)
        if nn == 0:
            raise ValueError("mean normal must be nonzero")
        if abs(t[0] @ t[1]) > 1e-9 or np.any(np.abs(t @ n) > 1e-9 * nn):
            raise ValueError("tangent basis must be orthogonal to itself and to the mean normal")
        if np.any(np.abs(np.linalg.norm(t, axis=1) - 1) > 1e-9):
            raise ValueError("tangent basis vectors must have unit length")
        if np.any(s <= 0):
            raise ValueError("sigmas must be positive")
        for name, val in (("position", x), ("mean_normal", n), ("tangent_basis", t), ("sigmas", s)):
            object.__setattr__(self, name, val)

    def to_dict(self) -> dict:
        return {
            "position": self.position.tolist(),
            "mean_normal": self.mean_normal.tolist(),
            "tangent_basis": self.tangent_basis.tolist(),
            "sigmas": self.sigmas.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ContactDistribution":
        return cls(doc["position"], doc["mean_normal"], doc["tangent_basis"], doc["sigmas"])

    @classmethod
    def from_normal(cls, position, mean_normal, sigmas) -> "ContactDistribution":
        """Build a distribution with the reference tangent frame of ``mean_normal``."""
        n = np.asarray(mean_normal, dtype=float)
        e1, e2 = reference_frame(n / np.linalg.norm(n))
        return cls(position, n, np.array([e1, e2]), sigmas)


_REF = np.array([0.0, 0.0, 1.0])
_REF_ALT = np.array([1.0, 0.0, 0.0])


def _reference_axis(N: np.ndarray) -> np.ndarray:
    return _REF if abs(N @ _REF) < 0.995 else _REF_ALT


def reference_frame(N: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic tangent frame (e1, e2) with e1 x e2 = N for unit N."""
    ref = _reference_axis(N)
    e1 = ref - (ref @ N) * N
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(N, e1)


@dataclass
class ShapeOperator:
    kappa: np.ndarray  # sorted |k1| >= |k2|
    directions: np.ndarray  # rows t1, t2, orthonormal and tangent
    normal: np.ndarray  # unit outward normal grad s / |grad s|
    umbilic: bool


def shape_operator_eigs(surface: ImplicitSurface, x) -> ShapeOperator:
    """Principal curvatures and directions of the level set through x."""
    _, g, H = surface.eval(x)
    return _shape_operator(surface, g, H)


def _shape_operator(surface, g, H) -> ShapeOperator:
    gn = np.linalg.norm(g)
    if gn < 1e-12:
        raise DomainError("zero gradient: no normal direction")
    N = g / gn
    e1, e2 = reference_frame(N)
    E = np.stack([e1, e2], axis=1)
    M = -(E.T @ H @ E) / gn
    M = 0.5 * (M + M.T)
    scale = 1.0 + abs(M).max()
    if surface.umbilic_everywhere or (abs(M[0, 1]) <= UMBILIC_TOL * scale and abs(M[0, 0] - M[1, 1]) <= UMBILIC_TOL * scale):
        k = 0.5 * (M[0, 0] + M[1, 1])
        return ShapeOperator(np.array([k, k]), np.array([e1, e2]), N, True)
    vals, vecs = np.linalg.eigh(M)
    order = sorted(range(2), key=lambda i: (-abs(vals[i]), -vals[i]))
    kappa = vals[order]
    t1 = E @ vecs[:, order[0]]
    t1 /= np.linalg.norm(t1)
    if t1 @ _reference_axis(N) < 0 or (t1 @ _reference_axis(N) == 0 and t1 @ e2 < 0):
        t1 = -t1
    t2 = np.cross(N, t1)
    return ShapeOperator(kappa, np.array([t1, t2]), N, False)


def _sigma_sq(kappa, params: CurvatureParams):
    raw = np.log(params.k_curv * np.abs(kappa) + params.eps)
    return np.maximum(raw, params.sigma_sq_min), raw > params.sigma_sq_min


def curvature_distribution(surface: ImplicitSurface, x, params: CurvatureParams | None = None) -> ContactDistribution:
    """Mean normal -grad s, principal tangent basis, log-curvature variances."""
    params = params or CurvatureParams()
    _, g, H = surface.eval(x)
    so = _shape_operator(surface, g, H)
    var, _ = _sigma_sq(so.kappa, params)
    return ContactDistribution(np.asarray(x, dtype=float), -g, so.directions, np.sqrt(var))


@dataclass
class DistributionJacobian:
    """Derivatives of one contact's distribution parameters w.r.t. its position.

    Each array has the position index last: ``d_normal[a, k] = d n_a / d x_k``.
    """

    d_normal: np.ndarray  # (3, 3)
    d_tangent: np.ndarray  # (2, 3, 3)
    d_sigma: np.ndarray  # (2, 3)


def surface_frame_jacobian(surface: ImplicitSurface, x):
    """Shape operator at x together with derivatives of normal, directions, kappa.

    Returns ``(so, d_mean_normal, d_dirs, d_kappa)``.  Raises DomainError when
    the principal directions are not differentiable (near-umbilic points on
    surfaces that are not umbilic everywhere).
    """
    _, g, H, K = surface.eval3(x)
    so = _shape_operator(surface, g, H)
    gn = np.linalg.norm(g)
    N = so.normal
    P = np.eye(3) - np.outer(N, N)
    # dN/dx_k = P H e_k / |g|
    dN = P @ H / gn  # (3, 3): dN[a, k]
    dgn = H @ N  # d|g|/dx_k
    S = -(P @ H @ P) / gn
    t = so.directions
    d_kappa = np.zeros((2, 3))
    d_dirs = np.zeros((2, 3, 3))
    dS = np.empty((3, 3, 3))
    for k in range(3):
        dP = -(np.outer(dN[:, k], N) + np.outer(N, dN[:, k]))
        dS[:, :, k] = -S * dgn[k] / gn - (dP @ H @ P + P @ K[:, :, k] @ P + P @ H @ dP) / gn
    for m in range(2):
        d_kappa[m] = np.einsum("a,abk,b->k", t[m], dS, t[m])
    if so.umbilic:
        if not surface.locally_umbilic(x):
            raise DomainError("principal directions are not differentiable at an isolated umbilic point")
        ref = _reference_axis(N)
        raw = ref - (ref @ N) * N
        nr = np.linalg.norm(raw)
        e1 = raw / nr
        d_raw = -(np.outer(N, ref @ dN) + (ref @ N) * dN)
        d_e1 = (np.eye(3) - np.outer(e1, e1)) @ d_raw / nr
        d_e2 = np.cross(dN.T, e1).T + np.cross(N, d_e1.T).T
        d_dirs[0], d_dirs[1] = d_e1, d_e2
        d_kappa[:] = d_kappa.mean(axis=0)
        return so, -H, d_dirs, d_kappa
    if abs(so.kappa[0] - so.kappa[1]) < EIG_GAP_TOL:
        raise DomainError("principal curvatures nearly coincide; direction derivative is ill-posed")
    for m in range(2):
        o = 1 - m
        coef_other = np.einsum("a,abk,b->k", t[o], dS, t[m]) / (so.kappa[m] - so.kappa[o])
        coef_normal = -(t[m] @ dN)
        d_dirs[m] = np.outer(t[o], coef_other) + np.outer(N, coef_normal)
    return so, -H, d_dirs, d_kappa


def curvature_distribution_jacobian(
    surface: ImplicitSurface, x, params: CurvatureParams | None = None
) -> tuple[ContactDistribution, DistributionJacobian]:
    params = params or CurvatureParams()
    so, d_n, d_t, d_kappa = surface_frame_jacobian(surface, x)
    _, g, _ = surface.eval(x)
    var, active = _sigma_sq(so.kappa, params)
    sig = np.sqrt(var)
    d_sig = np.zeros((2, 3))
    for m in range(2):
        if active[m]:
            k = so.kappa[m]
            dvar = params.k_curv * np.sign(k) * d_kappa[m] / (params.k_curv * abs(k) + params.eps)
            d_sig[m] = dvar / (2 * sig[m])
    dist = ContactDistribution(np.asarray(x, dtype=float), -g, so.directions, sig)
    return dist, DistributionJacobian(d_n, d_t, d_sig)
