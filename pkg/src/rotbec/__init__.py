"""Thomas-Fermi and Gross-Pitaevskii ground states of rapidly rotating 2D condensates."""

__version__ = "0.1.0"

from .errors import GridMismatchError, InvalidInputError, InvalidParameterError
from .gp_solver import EnergyBreakdown, GPState, Grid, MinimizeOptions, gp_energy, minimize_gp
from .potentials import TrapPotential, asym_homogeneity_check
from .tf_core import (
    ScaledTFSolution,
    TFSolution,
    critical_velocity,
    quartic_closed_form,
    scaled_tf,
    solve_tf,
    tf_density,
)
from .trial_states import VortexLattice, assemble_trial, build_vortex_lattice, giant_vortex_trial, regularized_tf_density

__all__ = [
    "EnergyBreakdown",
    "GPState",
    "Grid",
    "GridMismatchError",
    "InvalidInputError",
    "InvalidParameterError",
    "MinimizeOptions",
    "ScaledTFSolution",
    "TFSolution",
    "TrapPotential",
    "VortexLattice",
    "asym_homogeneity_check",
    "assemble_trial",
    "build_vortex_lattice",
    "critical_velocity",
    "giant_vortex_trial",
    "gp_energy",
    "minimize_gp",
    "quartic_closed_form",
    "regularized_tf_density",
    "scaled_tf",
    "solve_tf",
    "tf_density",
]
