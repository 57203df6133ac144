"""Peak boundary flux of first Dirichlet eigenfunctions on planar domains.

Boundary integral (Nystrom) solver for the first Dirichlet eigenpair of
smooth and rounded-polygon domains, the scale-invariant flux functional
F = d_n u1(x*) / lambda1, its shape derivatives and a gradient-ascent
shape optimizer.
"""
from ._accel import backend_name
from .eigensolve import EigenResult, find_first_eigenvalue, fredholm_det, null_density, objective, rellich_norm
from .geometry.curve import PanelizedCurve, build_circle, build_ellipse, build_star
from .geometry.polygon import PolarPolygon, RoundedPolygon, build_from_polygon, build_rounded_polygon
from .shapegrad import ShapeContext, radial_gradient, shape_derivative

__version__ = "0.1.0"

__all__ = [
    "EigenResult", "PanelizedCurve", "PolarPolygon", "RoundedPolygon", "ShapeContext", "backend_name",
    "build_circle", "build_ellipse", "build_from_polygon", "build_rounded_polygon", "build_star",
    "find_first_eigenvalue", "fredholm_det", "null_density", "objective", "radial_gradient", "rellich_norm",
    "shape_derivative",
]
