"""Pulse schedules: builders, the sequence DSL and first-order analytics."""
from .analytic import (
    PairCoefficients,
    analytic_coherence,
    analytic_t2,
    cycle_unitary,
    effective_hamiltonian,
    one_channel_coefficients,
    pair_coefficients,
    permutation_matrix,
    schedule_unitary,
    two_channel_coefficients,
)
from .core import (
    GateEvent,
    PulseSchedule,
    Segment,
    build_amplify_schedule,
    build_general_schedule,
    build_one_channel_schedule,
    build_two_channel_schedule,
    mu_from_tau,
    rebuild,
)
from .dsl import emit_sequence_dsl, parse_sequence_dsl

__all__ = [
    "GateEvent", "PulseSchedule", "Segment", "PairCoefficients",
    "build_amplify_schedule", "build_one_channel_schedule", "build_two_channel_schedule",
    "build_general_schedule", "rebuild", "mu_from_tau",
    "effective_hamiltonian", "pair_coefficients", "permutation_matrix",
    "one_channel_coefficients", "two_channel_coefficients",
    "analytic_t2", "analytic_coherence", "cycle_unitary", "schedule_unitary",
    "parse_sequence_dsl", "emit_sequence_dsl",
]
