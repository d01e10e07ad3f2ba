"""Reduced-order LFP half-cell simulator with variable solid diffusivity."""
from .basis import Discretization, RadialBasis, eigenroots
from .constraints import ConstraintSolver
from .errors import (ConfigError, DomainError, LfpsimError, NumericError, SingularJacobianError,
                     SolverError)
from .params import Direction, ParameterSet, RateCorrections, SaturationParams
from .state import CellState, PotentialField

__version__ = "0.1.0"

__all__ = [
    "CellState", "ConfigError", "ConstraintSolver", "Direction", "Discretization", "DomainError",
    "LfpsimError", "NumericError", "ParameterSet", "PotentialField", "RadialBasis",
    "RateCorrections", "SaturationParams", "SingularJacobianError", "SolverError", "eigenroots",
]
