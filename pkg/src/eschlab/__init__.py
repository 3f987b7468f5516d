"""Cahn-Hilliard dynamics on evolving curves and axisymmetric surfaces.

Phase-field solvers on moving 1D domains and surfaces of revolution, the
matching sharp-interface models, and the asymptotic calibration constants
that connect the two.
"""

from eschlab.model import (
    MobilityKind,
    ModelParams,
    PotentialKind,
    ProfileSolution,
    correction_constant,
    equilibrium_profile,
    mobility,
    potential_derivative,
    potential_value,
    solve_profile,
    surface_tension_constant,
    to_dimensionless,
)

__version__ = "0.1.0"

__all__ = [
    "MobilityKind",
    "ModelParams",
    "PotentialKind",
    "ProfileSolution",
    "correction_constant",
    "equilibrium_profile",
    "mobility",
    "potential_derivative",
    "potential_value",
    "solve_profile",
    "surface_tension_constant",
    "to_dimensionless",
]
