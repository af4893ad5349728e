"""Numerical laboratory for the Alt-Phillips energy with a varying singularity.

Minimises ``J(v) = int 1/2 |Dv|^2 + delta(x) (v+)^gamma(x)`` on 1D/2D grids
and measures growth, non-degeneracy, free boundary geometry, a Weiss-type
monotonicity quantity and blow-up profiles.
"""

__version__ = "0.1.0"

from .grid import BallRegion, CoefficientPair, GridSpec, ScalarField, box_grid, read_field, write_field
from .energy import EnergyParams, energy, energy_gradient, harmonic_replacement
from .minimize import Problem, SolverParams, minimize

__all__ = [
    "__version__",
    "GridSpec",
    "ScalarField",
    "BallRegion",
    "CoefficientPair",
    "box_grid",
    "read_field",
    "write_field",
    "EnergyParams",
    "energy",
    "energy_gradient",
    "harmonic_replacement",
    "Problem",
    "SolverParams",
    "minimize",
]
