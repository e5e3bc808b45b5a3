"""Straight-line flows on translation surfaces and empirical recurrence checks."""
__version__ = "0.1.0"

from .surface import (BadParameter, Direction, SurfaceError, SurfacePoint, TranslationSurface, Vec2,
                      build_surface, builtin, load_surface, surface_from_json, vorobets_constant)
from .flow import distance, flow_many, flow_point, trace
from .cylinders import Cylinder, cylinder_sequence, enumerate_cylinders, separation_check
from .circle import Arc, covers_circle, minimal_covering_constant, union_measure
from .iet import IET, first_return_iet, iet_apply, recurrence_scan
from .series import SeriesSpec, divergence_verdict, partial_sums

__all__ = [
    "__version__", "BadParameter", "Direction", "SurfaceError", "SurfacePoint", "TranslationSurface",
    "Vec2", "build_surface", "builtin", "load_surface", "surface_from_json", "vorobets_constant",
    "distance", "flow_many", "flow_point", "trace", "Cylinder", "cylinder_sequence",
    "enumerate_cylinders", "separation_check", "Arc", "covers_circle", "minimal_covering_constant",
    "union_measure", "IET", "first_return_iet", "iet_apply", "recurrence_scan", "SeriesSpec",
    "divergence_verdict", "partial_sums",
]
