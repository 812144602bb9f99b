"""Semantic-space folding geometry."""

from .folding import (
    ClusterSet,
    EdgeFolding,
    EmbeddingSequence,
    adaptive_alpha,
    cluster,
    folding_metrics,
    folding_summary,
)
from .meb import Ball, meb, unit_ball_volume, volume, volume_delta
from .phase import PhaseTrajectory, oscillations, phase_trajectory
from .tsne import TsneResult, tsne, tsne_reduce

__all__ = [
    "Ball",
    "ClusterSet",
    "EdgeFolding",
    "EmbeddingSequence",
    "PhaseTrajectory",
    "TsneResult",
    "adaptive_alpha",
    "cluster",
    "folding_metrics",
    "folding_summary",
    "meb",
    "oscillations",
    "phase_trajectory",
    "tsne",
    "tsne_reduce",
    "unit_ball_volume",
    "volume",
    "volume_delta",
]
