"""Analytic lower bound on the probability of force closure under contact-normal uncertainty."""

__version__ = "0.1.0"
FORMAT_VERSION = "1"

from .bound import BoundReport, DegenerateGradientError, evaluate, finite_difference_gradient, gradient
from .gausspoly import PlanarGaussian, QuadratureConfig, polygon_probability, polygon_probability_grad
from .grasp import (
    ConstantField,
    CurvatureModel,
    EquatorField,
    ExplicitModel,
    FieldModel,
    GraspSpec,
    load_grasp,
    uncertainty_override,
)
from .mcoracle import McConfig, McEstimate, estimate_pfc, verify_containment
from .surfaces import ContactDistribution, CurvatureParams, DomainError, ImplicitSurface, load_surface
from .synth import SynthConfig, SynthesisError, SynthTrace, synthesize, synthesize_restarts
from .vlp import SearchDirections, TangentPolygon, build_polygons, joint_vertex_lp, solve_vertex
from .wrench import FrictionModel, LPError, build_wrench_model, hull_contains_origin, min_weight_metric

__all__ = [
    "BoundReport",
    "ConstantField",
    "ContactDistribution",
    "CurvatureModel",
    "CurvatureParams",
    "DegenerateGradientError",
    "DomainError",
    "EquatorField",
    "ExplicitModel",
    "FieldModel",
    "FrictionModel",
    "GraspSpec",
    "ImplicitSurface",
    "LPError",
    "McConfig",
    "McEstimate",
    "PlanarGaussian",
    "QuadratureConfig",
    "SearchDirections",
    "SynthConfig",
    "SynthTrace",
    "SynthesisError",
    "TangentPolygon",
    "build_polygons",
    "build_wrench_model",
    "estimate_pfc",
    "evaluate",
    "finite_difference_gradient",
    "gradient",
    "hull_contains_origin",
    "joint_vertex_lp",
    "load_grasp",
    "load_surface",
    "min_weight_metric",
    "polygon_probability",
    "polygon_probability_grad",
    "solve_vertex",
    "synthesize",
    "synthesize_restarts",
    "uncertainty_override",
    "verify_containment",
]
