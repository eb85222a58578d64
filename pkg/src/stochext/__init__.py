"""Extremal ranges of smooth random processes from high-frequency characteristic functions."""

__version__ = "0.1.0"

from .bump import BumpSpec, bump_eval, bump_expr, bump_mass
from .errors import (
    DomainError, NumericalError, ParseError, ScenarioError, StochextError, WindingAmbiguousError,
)
from .expr import ProcessSpec, diff, evaluate, parse, to_string
from .extremum import CurveTrace, ExtremumEstimate, estimate, no_extrema_test, trace_curve
from .oracle import grid_extrema, reference_integral
from .oscint import QuadPlan, decay_exponent, ibp_transform, oscillatory_integral
from .phase import (
    StationaryPoint, asymptotic_sum, cm_constant, find_stationary_points, theorem2_asymptotic,
)
from .prob import Box, Deterministic, Discrete, MonteCarlo, density_at, integrate_over_omega

__all__ = [
    "__version__", "BumpSpec", "bump_eval", "bump_expr", "bump_mass", "DomainError",
    "NumericalError", "ParseError", "ScenarioError", "StochextError", "WindingAmbiguousError",
    "ProcessSpec", "diff", "evaluate", "parse", "to_string", "CurveTrace", "ExtremumEstimate",
    "estimate", "no_extrema_test", "trace_curve", "grid_extrema", "reference_integral",
    "QuadPlan", "decay_exponent", "ibp_transform", "oscillatory_integral", "StationaryPoint",
    "asymptotic_sum", "cm_constant", "find_stationary_points", "theorem2_asymptotic", "Box",
    "Deterministic", "Discrete", "MonteCarlo", "density_at", "integrate_over_omega",
]
