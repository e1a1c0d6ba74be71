"""Continuous-time consensus with time-varying, possibly non-reciprocal weights."""
from .analysis import (
    check_cut_balance,
    contraction_audit,
    contraction_bound,
    max_ratio,
    moreau_edge_set,
    persistent_connectivity_report,
    product_bound,
    rate_bound,
    rescaling_sequence,
    running_max_ratio,
    slow_divergence_check,
)
from .dynamics import SolverConfig, Trajectory, detect_consensus, diameter, simulate
from .errors import CapacityError, ConnectivityHorizonError, DomainError, NumericalFailure
from .ordering import ordered_view, sort_permutation
from .scenarios import RhoSequence, ScenarioSpec
from .weights import PiecewiseWeight, ScheduledWeight, SystemDefinition, TimeSegment

__version__ = "0.1.0"

__all__ = [
    "CapacityError", "ConnectivityHorizonError", "DomainError", "NumericalFailure",
    "PiecewiseWeight", "RhoSequence", "ScenarioSpec", "ScheduledWeight", "SolverConfig",
    "SystemDefinition", "TimeSegment", "Trajectory", "check_cut_balance", "contraction_audit",
    "contraction_bound", "detect_consensus", "diameter", "max_ratio", "moreau_edge_set",
    "ordered_view", "persistent_connectivity_report", "product_bound", "rate_bound",
    "rescaling_sequence", "running_max_ratio", "simulate", "slow_divergence_check",
    "sort_permutation",
]
