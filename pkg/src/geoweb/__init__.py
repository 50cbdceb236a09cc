"""Geodesic webs of hypersurfaces: residual checks, Euler-type construction, envelopes.

Web functions are expression strings in x1..xn (see ``geoweb.expr`` for the
grammar).  The main entry points:

>>> from geoweb import flex, parse
>>> flex(parse("x2/x1", 2), 1, 2, (1.0, 2.0))
0.0
"""
from .expr import (DivisionByZeroError, EvalError, Expr, NegativeSqrtError, ParseError, diff,
                   evaluate, gradient, hessian, parse, to_string)
from .poly import Poly, expand_to_poly
from .geometry import (Connection, Geometry, Metric, christoffel_from_metric,
                       constant_curvature_connection, hypersurface_connection, integrate_geodesic)
from .sampling import CheckResult, SamplePlan
from .fields import ExprField, as_field
from .webcheck import (WebSpec, constant_curvature_residual, flex, geodesic_oracle_check,
                       geodesic_residual, geodesic_web_check, hyperplanarity_check,
                       hypersurface_residual, pair_implication_check, ratio_independence_check)
from .euler import (ConvergenceError, EulerSpec, SolvedField, euler_system_residual,
                    implicit_solve, reconstruct_psi)
from .envelope import (PlaneFamily, envelope_of, family_from_web_function, same_zero_set,
                       verify_tangency)

__version__ = "0.1.0"

__all__ = [
    "DivisionByZeroError", "EvalError", "Expr", "NegativeSqrtError", "ParseError",
    "diff", "evaluate", "gradient", "hessian", "parse", "to_string",
    "Poly", "expand_to_poly",
    "Connection", "Geometry", "Metric", "christoffel_from_metric",
    "constant_curvature_connection", "hypersurface_connection", "integrate_geodesic",
    "CheckResult", "SamplePlan", "ExprField", "as_field",
    "WebSpec", "constant_curvature_residual", "flex", "geodesic_oracle_check",
    "geodesic_residual", "geodesic_web_check", "hyperplanarity_check",
    "hypersurface_residual", "pair_implication_check", "ratio_independence_check",
    "ConvergenceError", "EulerSpec", "SolvedField", "euler_system_residual",
    "implicit_solve", "reconstruct_psi",
    "PlaneFamily", "envelope_of", "family_from_web_function", "same_zero_set",
    "verify_tangency",
]
