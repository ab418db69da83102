"""Numerical Lelong numbers, fiber transforms and monodromy on polynomial hypersurfaces."""

__version__ = "0.1.0"

from .lelong import (  # noqa: E402
    LelongEstimate,
    RadiiSchedule,
    check_calculus,
    lelong_circle_max_1d,
    lelong_circle_mean_1d,
    lelong_generic_line,
    lelong_min_over_branches,
    lelong_number,
    lelong_sphere_max,
    projective_mass,
    vanishing_mult,
)
from .monodromy import monodromy_on_line, strong_local_irreducibility  # noqa: E402
from .poly import SparsePoly, parse_poly, track_roots, univariate_roots  # noqa: E402
from .pshfun import fiber_transform, parse_psh, restrict_to_base_line  # noqa: E402
from .variety import HypersurfaceChart, fiber, make_chart, multiplicity  # noqa: E402

__all__ = [
    "HypersurfaceChart", "LelongEstimate", "RadiiSchedule", "SparsePoly", "check_calculus", "fiber",
    "fiber_transform", "lelong_circle_max_1d", "lelong_circle_mean_1d", "lelong_generic_line",
    "lelong_min_over_branches", "lelong_number", "lelong_sphere_max", "make_chart", "monodromy_on_line",
    "multiplicity", "parse_poly", "parse_psh", "projective_mass", "restrict_to_base_line",
    "strong_local_irreducibility", "track_roots", "univariate_roots", "vanishing_mult",
]
