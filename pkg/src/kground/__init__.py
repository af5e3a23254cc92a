"""Numerical K-ground states of -Delta u + u = a(x) u^(p-1) on exterior domains.

Modules: geometry (exponents, thresholds, domains), radial (radial
solutions), quadform (second variation at the radial solution), solver2d
(cone-constrained ground states in (r, theta)), ag (double-revolution
domains), multiplicity (families over splittings), cli (command line).
"""

from .geometry import (DomainSpec, ExponentTable, ProblemSpec, WeightSpec, conditions_report,
                       critical_exponent, r_star, suff_condition)

__version__ = "0.1.0"

__all__ = [
    "DomainSpec", "ExponentTable", "ProblemSpec", "WeightSpec", "conditions_report",
    "critical_exponent", "r_star", "suff_condition", "__version__",
]
