"""Pseudospectral solitary waves of the anisotropic fractional NLS."""
from .errors import (ANLSError, BlowUpError, CollapseError, InconsistencyError,
                     NonConvergenceError, ResolutionError, SolverTimeout, ValidationError)
from .grid import (ComplexField, GridSpec, MultiplierSymbol, RealField, SpectralField,
                   apply_L, apply_multiplier, forward_transform, inverse_transform,
                   read_field, sobolev_norm, write_field)
from .groundstate import (GroundStateSolution, ProblemParams, Regime, SolverConfig,
                          classify_exponents, petviashvili_solve, pohozaev_residuals,
                          scale_soliton, weinstein_J)
from .symmetry import SymmetrizedField, axial_symmetrize

__version__ = "0.1.0"
