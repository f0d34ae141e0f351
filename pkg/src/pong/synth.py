"""Grasp synthesis by projected gradient ascent of L_fc on a surface.

Contacts are the decision variables.  Each iteration takes an ambient step
along the tangential part of dL_fc/dx (normalized over all fingers, so the
step size is a distance in meters), pulls every contact back onto s = 0
with Newton steps along the gradient, and accepts the move only if the
contacts stay on the surface and apart, the min-weight metric stays above
its floor and L_fc does not drop.  Rejected moves halve the step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bound import DegenerateGradientError, evaluate, finite_difference_gradient, gradient
from .gausspoly import QuadratureConfig
from .grasp import CurvatureModel, FieldModel, GraspSpec, UncertaintyField, uncertainty_override
from .surfaces import CurvatureParams, DomainError, ImplicitSurface
from .wrench import FrictionModel, build_wrench_model, min_weight_metric

SURFACE_TOL = 1e-8
MIN_STEP = 1e-7


class SynthesisError(RuntimeError):
    """No admissible initial grasp was found."""


@dataclass(frozen=True)
class SynthConfig:
    n_fingers: int = 3
    max_iters: int = 40
    step_init: float = 0.1
    l_bar_min: float = 0.3
    seed: int = 0
    min_contact_separation: float = 0.05
    n_dirs: int = 8
    max_init_tries: int = 5000

    def __post_init__(self):
        if self.n_fingers < 2:
            raise ValueError("n_fingers must be at least 2")
        if not self.step_init > 0:
            raise ValueError("step_init must be positive")
        if self.l_bar_min < 0:
            raise ValueError("l_bar_min must be nonnegative")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")


@dataclass
class Iterate:
    contacts: np.ndarray
    l_fc: float
    l_bar_star: float
    step: float
    accepted: bool
    gradient_mode: str = ""

    def to_dict(self) -> dict:
        return {
            "contacts": self.contacts.tolist(),
            "l_fc": self.l_fc,
            "l_bar_star": self.l_bar_star,
            "step": self.step,
            "accepted": self.accepted,
            "gradient_mode": self.gradient_mode,
        }


@dataclass
class SynthTrace:
    seed: int
    iterates: list = field(default_factory=list)
    final_contacts: np.ndarray | None = None
    final_report: object = None

    @property
    def accepted(self) -> list:
        return [it for it in self.iterates if it.accepted]

    @property
    def initial_contacts(self) -> np.ndarray:
        return self.iterates[0].contacts

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "iterates": [it.to_dict() for it in self.iterates],
            "final_contacts": None if self.final_contacts is None else self.final_contacts.tolist(),
            "final_report": None if self.final_report is None else self.final_report.to_dict(include_timing=False),
        }


def _model_for(surface: ImplicitSurface, curv: CurvatureParams, fld):
    if fld is None:
        return CurvatureModel(surface, curv)
    if isinstance(fld, FieldModel):
        return fld
    if not isinstance(fld, UncertaintyField) and not callable(fld):
        raise TypeError("uncertainty field must be callable")
    return uncertainty_override(fld, surface)


def _separated(x: np.ndarray, dmin: float) -> bool:
    d = np.linalg.norm(x[:, None] - x[None], axis=2)
    return bool(np.all(d[np.triu_indices(len(x), 1)] >= dmin))


def _make_grasp(x, model, surface, friction: FrictionModel, cfg: SynthConfig, curv) -> GraspSpec:
    return GraspSpec.from_models(
        x,
        model,
        surface=surface,
        mu=friction.mu,
        n_sides=friction.n_sides,
        n_dirs=cfg.n_dirs,
        curvature=curv,
    )


def _initial_contacts(surface, model, friction, cfg, curv, rng):
    counts = {"separation": 0, "min_weight": 0, "domain": 0}
    for _ in range(cfg.max_init_tries):
        dirs = rng.standard_normal((cfg.n_fingers, 3))
        try:
            x = np.array([surface.ray_point(d) for d in dirs])
        except DomainError:
            counts["domain"] += 1
            continue
        if not _separated(x, cfg.min_contact_separation):
            counts["separation"] += 1
            continue
        try:
            g = _make_grasp(x, model, surface, friction, cfg, curv)
        except (DomainError, ValueError):
            counts["domain"] += 1
            continue
        mw = min_weight_metric(build_wrench_model(g).w_bar)
        if not mw.feasible or mw.l_bar_star < cfg.l_bar_min:
            counts["min_weight"] += 1
            continue
        return x, g
    worst = max(counts, key=counts.get)
    names = {
        "separation": f"min_contact_separation >= {cfg.min_contact_separation}",
        "min_weight": f"min-weight metric >= {cfg.l_bar_min}",
        "domain": "surface smoothness at sampled points",
    }
    raise SynthesisError(
        f"no feasible initial grasp in {cfg.max_init_tries} samples; "
        f"most often violated: {names[worst]} ({counts})"
    )


def _ascent_direction(grasp, qcfg):
    try:
        g = gradient(grasp, cfg=qcfg)
        mode = "analytic"
    except (DegenerateGradientError, DomainError):
        g = finite_difference_gradient(grasp, cfg=qcfg)
        mode = "finite_difference"
    g = g.reshape(-1, 3)
    # keep the tangential part; the normal part is undone by projection anyway
    for i, c in enumerate(grasp.contacts):
        n = c.mean_normal / np.linalg.norm(c.mean_normal)
        g[i] -= (g[i] @ n) * n
    return g, mode


def synthesize(
    surface: ImplicitSurface,
    curv: CurvatureParams | None = None,
    friction: FrictionModel | None = None,
    cfg: SynthConfig | None = None,
    field=None,
    qcfg: QuadratureConfig | None = None,
) -> SynthTrace:
    """One projected-gradient run from a rejection-sampled start.

    ``field`` optionally replaces the curvature-derived sigmas with a
    position -> (sigma1, sigma2) map.
    """
    curv = curv or CurvatureParams()
    friction = friction or FrictionModel()
    cfg = cfg or SynthConfig()
    qcfg = qcfg or QuadratureConfig()
    model = _model_for(surface, curv, field)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed)))

    x, grasp = _initial_contacts(surface, model, friction, cfg, curv, rng)
    rep = evaluate(grasp, qcfg)
    trace = SynthTrace(cfg.seed)
    trace.iterates.append(Iterate(x.copy(), rep.l_fc, rep.l_bar_star, 0.0, True, "init"))
    step = cfg.step_init
    it = 0
    while it < cfg.max_iters and step >= MIN_STEP:
        it += 1
        g, mode = _ascent_direction(grasp, qcfg)
        gn = np.linalg.norm(g)
        if gn == 0.0:
            break
        direction = g / gn
        while step >= MIN_STEP:
            cand = _try_step(surface, x, direction, step, model, friction, cfg, curv, qcfg)
            if cand is not None and cand[2].l_fc >= rep.l_fc:
                x, grasp, rep = cand
                trace.iterates.append(Iterate(x.copy(), rep.l_fc, rep.l_bar_star, step, True, mode))
                step = min(2.0 * step, cfg.step_init)
                break
            l_new = float("nan") if cand is None else cand[2].l_fc
            lb = float("nan") if cand is None else cand[2].l_bar_star
            trace.iterates.append(Iterate(x + step * direction, l_new, lb, step, False, mode))
            step *= 0.5
    trace.final_contacts = x
    trace.final_report = rep
    return trace


def _try_step(surface, x, direction, step, model, friction, cfg, curv, qcfg):
    try:
        xn = np.array([surface.project(p) for p in x + step * direction])
        if max(abs(surface.value(p)) for p in xn) > SURFACE_TOL:
            return None
        if not _separated(xn, cfg.min_contact_separation):
            return None
        g = _make_grasp(xn, model, surface, friction, cfg, curv)
        rep = evaluate(g, qcfg)
    except (DomainError, ValueError):
        return None
    if not rep.feasible and cfg.l_bar_min > 0:
        return None
    if rep.l_bar_star < cfg.l_bar_min:
        return None
    return xn, g, rep


def synthesize_restarts(
    surface: ImplicitSurface,
    curv: CurvatureParams | None = None,
    friction: FrictionModel | None = None,
    cfg: SynthConfig | None = None,
    restarts: int = 5,
    field=None,
    qcfg: QuadratureConfig | None = None,
) -> list[SynthTrace]:
    """Independent runs with seeds spawned from ``cfg.seed``, in restart order."""
    cfg = cfg or SynthConfig()
    children = np.random.SeedSequence(cfg.seed).generate_state(restarts, dtype=np.uint64)
    traces = []
    for s in children:
        sub = SynthConfig(**{**cfg.__dict__, "seed": int(s)})
        traces.append(synthesize(surface, curv, friction, sub, field, qcfg))
    return traces


def best_trace(traces: list[SynthTrace]) -> SynthTrace:
    return max(traces, key=lambda t: t.final_report.l_fc)
