"""Solver and verifier for stationary two-layer granular configurations.

Computes the maximal standing profile, the transport-ray geometry, the
unique rolling-layer density and the minimal profile on 2D polygonal
tables with general rim heights (walls allowed) and anisotropic slope
constraints, and certifies the geometric hypotheses under which the
solution exists and is unique.
"""

from .fields import Grid, ScalarField
from .gauge import Gauge, GaugeError, ellipse, euclidean, pnorm
from .geometry import (Boundary, BoundaryDatum, ConfigError, GeometryError,
                       Scene, Source, Tolerances, load_scene)
from .pipeline import Solution, solve_scene

__all__ = [
    "Grid", "ScalarField", "Gauge", "GaugeError", "euclidean", "ellipse",
    "pnorm", "Boundary", "BoundaryDatum", "Scene", "Source", "Tolerances",
    "ConfigError", "GeometryError", "load_scene", "Solution", "solve_scene",
]

__version__ = "0.1.0"
