"""Bound states of the 1D Dirac equation with N delta-function centers.

Two independent engines (a Green's-function determinant and a transfer-matrix
product) plus closed-form level equations for one to three centers.
"""
from .core import (BoundStateProblem, DeltaCenter, DeltaConvention, DiracDeltaError, DomainError,
                   EnergySpectrum, GapVariables, Root, SingularityError, SolverBudgetExceeded,
                   ValidationError, kappa_of, rho_of, rho_power_identities, x_variable)
from .rootfind import SolverOptions
from .greens import assemble_delta_matrix, delta_determinant, free_greens, greens_spectrum
from .transfer import (bound_state_residual, delta_connection, free_gap_matrix, is_valid_connection,
                       segment_matrix, stack_spectrum, total_transfer, transfer_spectrum)
from .closedform import PresetKind, closedform_spectrum, merged_limit_energy, preset_problem, single_energy

__version__ = "0.1.0"
