"""Attention-energy statistics and Monte Carlo checks of the energy ordering."""

from .attention import AttentionRecord, read_attention, read_spans, validate_spans, write_catt
from .boltzmann import boltzmann_weights, energies_from_logits, logits_from_weights
from .empirical import BondEnergySample, OrderingReport, bond_energies, ordering_report
from .ergodic import ErgodicResult, ergodic_energy_sim, routing_bound, routing_check, routing_ratio
from .paths import PathGraph, build_step_graph, enumerate_paths, softmin_energy
from .theory import (
    RopeConfig,
    RopeMCResult,
    ordering_failure_rate,
    rope_mc,
    sample_bound,
)

__all__ = [
    "AttentionRecord",
    "BondEnergySample",
    "ErgodicResult",
    "OrderingReport",
    "PathGraph",
    "RopeConfig",
    "RopeMCResult",
    "boltzmann_weights",
    "bond_energies",
    "build_step_graph",
    "energies_from_logits",
    "enumerate_paths",
    "ergodic_energy_sim",
    "logits_from_weights",
    "ordering_failure_rate",
    "ordering_report",
    "read_attention",
    "read_spans",
    "rope_mc",
    "routing_bound",
    "routing_check",
    "routing_ratio",
    "sample_bound",
    "softmin_energy",
    "validate_spans",
    "write_catt",
]
