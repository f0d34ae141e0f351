"""Grasp specifications and the per-contact distribution models behind them.

A contact's uncertainty distribution is produced by a *model* so that the
grasp can be re-evaluated at moved contact positions (finite differences,
synthesis) and differentiated w.r.t. those positions:

* :class:`ExplicitModel` - normal, tangent basis and sigmas given directly;
  moving the contact only changes its moment arm.
* :class:`CurvatureModel` - everything from the surface's local curvature.
* :class:`FieldModel` - normal and tangent basis from the surface, sigmas
  from a user supplied field (see :func:`uncertainty_override`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .surfaces import (
    ContactDistribution,
    CurvatureParams,
    DistributionJacobian,
    ImplicitSurface,
    curvature_distribution,
    curvature_distribution_jacobian,
    surface_frame_jacobian,
    shape_operator_eigs,
)


class ExplicitModel:
    kind = "explicit"

    def __init__(self, mean_normal, tangent_basis, sigmas):
        self.mean_normal = np.asarray(mean_normal, dtype=float)
        self.tangent_basis = np.asarray(tangent_basis, dtype=float)
        self.sigmas = np.asarray(sigmas, dtype=float)

    def resolve(self, x) -> ContactDistribution:
        return ContactDistribution(x, self.mean_normal, self.tangent_basis, self.sigmas)

    def jacobian(self, x):
        z = DistributionJacobian(np.zeros((3, 3)), np.zeros((2, 3, 3)), np.zeros((2, 3)))
        return self.resolve(x), z


class CurvatureModel:
    kind = "curvature"

    def __init__(self, surface: ImplicitSurface, params: CurvatureParams | None = None):
        self.surface = surface
        self.params = params or CurvatureParams()

    def resolve(self, x) -> ContactDistribution:
        return curvature_distribution(self.surface, x, self.params)

    def jacobian(self, x):
        return curvature_distribution_jacobian(self.surface, x, self.params)


class UncertaintyField:
    """Position -> (sigma1, sigma2).  Subclasses may supply an exact jacobian."""

    name = "custom"

    def __init__(self, fn: Callable | None = None):
        self._fn = fn

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self._fn(np.asarray(x, dtype=float)), dtype=float).reshape(2)

    def jacobian(self, x) -> np.ndarray:
        """(2, 3) derivative; central differences unless overridden."""
        x = np.asarray(x, dtype=float)
        h = 1e-6
        J = np.empty((2, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            J[:, k] = (self(x + e) - self(x - e)) / (2 * h)
        return J

    def spec(self) -> str:
        return self.name


class ConstantField(UncertaintyField):
    name = "constant"

    def __init__(self, sigmas):
        super().__init__()
        self.sigmas = np.asarray(sigmas, dtype=float).reshape(2)

    def __call__(self, x):
        return self.sigmas.copy()

    def jacobian(self, x):
        return np.zeros((2, 3))

    def spec(self) -> str:
        return f"constant:{self.sigmas[0]!r},{self.sigmas[1]!r}"


class EquatorField(UncertaintyField):
    """Isotropic sigma growing with height above the center's equatorial plane.

    ``sigma = scale * (floor + sqrt(dz^2 + delta^2))`` with ``dz`` the
    z offset from ``center``; ``delta`` smooths the kink at the equator.
    """

    name = "equator"

    def __init__(self, scale: float, center=(0.0, 0.0, 0.0), floor: float = 0.05, delta: float = 1e-3):
        super().__init__()
        if scale <= 0:
            raise ValueError("equator field scale must be positive")
        self.scale = float(scale)
        self.center = np.asarray(center, dtype=float)
        self.floor = float(floor)
        self.delta = float(delta)

    def __call__(self, x):
        dz = float(x[2] - self.center[2])
        s = self.scale * (self.floor + np.hypot(dz, self.delta))
        return np.array([s, s])

    def jacobian(self, x):
        dz = float(x[2] - self.center[2])
        J = np.zeros((2, 3))
        J[:, 2] = self.scale * dz / np.hypot(dz, self.delta)
        return J

    def spec(self) -> str:
        return f"equator:{self.scale!r}"


def parse_field(text: str, center=(0.0, 0.0, 0.0)) -> UncertaintyField:
    """Parse ``equator:<scale>`` or ``constant:<s1>,<s2>``."""
    kind, _, arg = text.partition(":")
    if kind == "equator":
        return EquatorField(float(arg), center)
    if kind == "constant":
        s1, s2 = (float(v) for v in arg.split(","))
        return ConstantField((s1, s2))
    raise ValueError(f"unknown uncertainty field {text!r}")


class FieldModel:
    kind = "field"

    def __init__(self, surface: ImplicitSurface, fld: UncertaintyField):
        self.surface = surface
        self.field = fld

    def _sigmas(self, x):
        s = self.field(x)
        if np.any(~np.isfinite(s)) or np.any(s <= 0):
            raise ValueError(f"uncertainty field returned a nonpositive value {s} at {x}")
        return s

    def resolve(self, x) -> ContactDistribution:
        so = shape_operator_eigs(self.surface, x)
        _, g, _ = self.surface.eval(x)
        return ContactDistribution(x, -g, so.directions, self._sigmas(x))

    def jacobian(self, x):
        so, d_n, d_t, _ = surface_frame_jacobian(self.surface, x)
        _, g, _ = self.surface.eval(x)
        dist = ContactDistribution(x, -g, so.directions, self._sigmas(x))
        return dist, DistributionJacobian(d_n, d_t, self.field.jacobian(x))


def uncertainty_override(fld, surface: ImplicitSurface) -> FieldModel:
    """Distribution hook replacing curvature variances with ``fld(x)``.

    Mean normal and tangent basis still come from the surface.  ``fld`` may
    be an :class:`UncertaintyField` or any callable returning two sigmas.
    """
    if not isinstance(fld, UncertaintyField):
        fld = UncertaintyField(fld)
    return FieldModel(surface, fld)


@dataclass(frozen=True)
class GraspSpec:
    contacts: tuple
    models: tuple
    mu: float = 0.5
    n_sides: int = 4
    n_dirs: int = 8
    torque_origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    surface: ImplicitSurface | None = None
    curvature: CurvatureParams = field(default_factory=CurvatureParams)

    def __post_init__(self):
        object.__setattr__(self, "contacts", tuple(self.contacts))
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "torque_origin", np.asarray(self.torque_origin, dtype=float).reshape(3))
        if len(self.contacts) != len(self.models) or not self.contacts:
            raise ValueError("need at least one contact and one model per contact")
        if not self.mu > 0:
            raise ValueError("friction coefficient must be positive")
        if self.n_sides < 1:
            raise ValueError("n_sides must be positive")
        if self.n_dirs < 3:
            raise ValueError("n_dirs must be at least 3")

    @property
    def n_fingers(self) -> int:
        return len(self.contacts)

    @property
    def positions(self) -> np.ndarray:
        return np.array([c.position for c in self.contacts])

    @classmethod
    def from_models(cls, positions, models, **kw) -> "GraspSpec":
        positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        if not isinstance(models, (list, tuple)):
            models = [models] * len(positions)
        contacts = [m.resolve(x) for m, x in zip(models, positions)]
        surface = kw.get("surface")
        if "torque_origin" not in kw and surface is not None:
            kw["torque_origin"] = surface.center
        return cls(tuple(contacts), tuple(models), **kw)

    @classmethod
    def from_distributions(cls, dists, **kw) -> "GraspSpec":
        models = [ExplicitModel(d.mean_normal, d.tangent_basis, d.sigmas) for d in dists]
        return cls(tuple(dists), tuple(models), **kw)

    def moved(self, positions) -> "GraspSpec":
        positions = np.asarray(positions, dtype=float).reshape(self.n_fingers, 3)
        contacts = tuple(m.resolve(x) for m, x in zip(self.models, positions))
        return replace(self, contacts=contacts)

    def jacobians(self) -> list[DistributionJacobian]:
        return [m.jacobian(c.position)[1] for m, c in zip(self.models, self.contacts)]

    # -- JSON -------------------------------------------------------------

    def to_dict(self) -> dict:
        contacts = []
        for c, m in zip(self.contacts, self.models):
            if m.kind == "curvature":
                contacts.append({"position": c.position.tolist(), "from_curvature": True})
            elif m.kind == "field":
                contacts.append({"position": c.position.tolist(), "from_field": m.field.spec()})
            else:
                contacts.append(c.to_dict())
        return {
            "surface": None if self.surface is None else self.surface.to_dict(),
            "contacts": contacts,
            "mu": self.mu,
            "n_sides": self.n_sides,
            "n_dirs": self.n_dirs,
            "torque_origin": self.torque_origin.tolist(),
            "curvature": {
                "k_curv": self.curvature.k_curv,
                "eps": self.curvature.eps,
                "sigma_sq_min": self.curvature.sigma_sq_min,
            },
        }

    @classmethod
    def from_dict(cls, doc: dict, curvature: CurvatureParams | None = None) -> "GraspSpec":
        surface = ImplicitSurface.from_dict(doc["surface"]) if doc.get("surface") else None
        if curvature is None:
            curvature = CurvatureParams(**doc["curvature"]) if doc.get("curvature") else CurvatureParams()
        curv_model = None
        contacts, models = [], []
        for i, cd in enumerate(doc["contacts"]):
            x = np.asarray(cd["position"], dtype=float)
            if cd.get("from_curvature") or cd.get("from_field"):
                if surface is None:
                    raise ValueError(f"contact {i} derives its distribution from a surface but none is given")
                if cd.get("from_field"):
                    model = FieldModel(surface, parse_field(cd["from_field"], surface.center))
                else:
                    curv_model = curv_model or CurvatureModel(surface, curvature)
                    model = curv_model
            else:
                if "tangent_basis" in cd:
                    model = ExplicitModel(cd["mean_normal"], cd["tangent_basis"], cd["sigmas"])
                else:
                    d = ContactDistribution.from_normal(x, cd["mean_normal"], cd["sigmas"])
                    model = ExplicitModel(d.mean_normal, d.tangent_basis, d.sigmas)
            models.append(model)
            contacts.append(model.resolve(x))
        if doc.get("torque_origin") is not None:
            origin = doc["torque_origin"]
        else:
            origin = surface.center if surface is not None else np.zeros(3)
        return cls(
            tuple(contacts),
            tuple(models),
            mu=float(doc.get("mu", 0.5)),
            n_sides=int(doc.get("n_sides", 4)),
            n_dirs=int(doc.get("n_dirs", 8)),
            torque_origin=origin,
            surface=surface,
            curvature=curvature,
        )


def load_grasp(path, curvature: CurvatureParams | None = None) -> GraspSpec:
    return GraspSpec.from_dict(json.loads(Path(path).read_text()), curvature)
