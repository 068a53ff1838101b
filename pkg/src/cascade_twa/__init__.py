"""Truncated-Wigner simulation of superradiant emission from a cascaded chain
of two-level atoms coupled to a chiral waveguide, with exact small-N oracles."""

__version__ = "0.1.0"

from .correlators import CorrelatorSeries, FieldMoments, TrajectoryBatch, compute_t_limit, estimate_series
from .estimators import CascadedMasterEquation, DickeModel, TWASimulator
from .model import DriveSchedule, InitialState, SystemParams, bloch_from_pulse_area, validate
from .oracle import DensityMatrix, OracleError, analytic_single_atom, evolve_cascaded_exact, evolve_dicke
from .phase_space import PhaseConfig, sample_initial, weyl_spin_symbols
from .simulation import run_ensemble
from .validation import ConfigError

__all__ = [
    "CascadedMasterEquation", "ConfigError", "CorrelatorSeries", "DensityMatrix", "DickeModel",
    "DriveSchedule", "FieldMoments", "InitialState", "OracleError", "PhaseConfig", "SystemParams",
    "TWASimulator", "TrajectoryBatch", "analytic_single_atom", "bloch_from_pulse_area",
    "compute_t_limit", "estimate_series", "evolve_cascaded_exact", "evolve_dicke", "run_ensemble",
    "sample_initial", "validate", "weyl_spin_symbols",
]
