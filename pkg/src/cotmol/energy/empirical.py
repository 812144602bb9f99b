"""Empirical bond energies read off attention logits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import BadConfig, InsufficientData
from ..trace import BehaviorLabel, LabeledTrace
from .attention import AttentionRecord, validate_spans


@dataclass(frozen=True)
class BondEnergySample:
    bond: BehaviorLabel
    energy: float
    trace_id: str
    edge_index: int
    query_step: int
    key_step: int

    def as_row(self) -> dict:
        return {
            "trace_id": self.trace_id,
            "edge": self.edge_index,
            "bond": self.bond.code,
            "energy": self.energy,
            "query_step": self.query_step,
            "key_step": self.key_step,
        }


def _nearest_prior(vectors: np.ndarray, step: int) -> int:
    dists = np.linalg.norm(vectors[:step] - vectors[step], axis=1)
    return int(np.argmin(dists))


def bond_energies(
    labeled: LabeledTrace,
    attn: AttentionRecord,
    step_spans: Sequence[Sequence[int]],
    embeddings: np.ndarray | None = None,
) -> list[BondEnergySample]:
    """One energy per labeled edge ``step[t] -> step[t+1]``.

    Each bond is measured between the final tokens of two steps, with the
    logit averaged over heads and negated:

    - deep reasoning (and normal operation): the new step queries the step
      right before it;
    - self-reflection: the new step queries its nearest earlier step in
      embedding space (L2), so ``embeddings`` is required when the trace has
      reflection edges;
    - exploration: the previous step queries the exploration step.
    """
    steps = len(labeled.trace.steps)
    spans = validate_spans(step_spans, steps, attn.tokens)
    last = [e - 1 for _, e in spans]
    if embeddings is not None:
        embeddings = np.asarray(embeddings, dtype=float)
        if embeddings.shape[0] != steps:
            raise BadConfig(f"{embeddings.shape[0]} embeddings for {steps} steps")

    out = []
    for t, label in enumerate(labeled.edge_labels):
        cur = t + 1
        if label is BehaviorLabel.EXPLORE:
            q_step, k_step = t, cur
        elif label is BehaviorLabel.REFLECT:
            if embeddings is None:
                raise BadConfig("reflection bonds need step embeddings to find the nearest prior step")
            q_step, k_step = cur, _nearest_prior(embeddings, cur)
        else:
            q_step, k_step = cur, t
        logit = attn.mean_logit(last[q_step], last[k_step])
        out.append(BondEnergySample(label, -logit, labeled.trace.id, t, q_step, k_step))
    return out


ORDER = (BehaviorLabel.DEEP, BehaviorLabel.REFLECT, BehaviorLabel.EXPLORE)


@dataclass(frozen=True)
class OrderingReport:
    means: dict[BehaviorLabel, float]
    counts: dict[BehaviorLabel, int]
    ordering_holds: bool
    gap_dr: float                          # mean(R) - mean(D)
    gap_re: float                          # mean(E) - mean(R)
    ci_dr: tuple[float, float]
    ci_re: tuple[float, float]

    def to_json(self) -> dict:
        return {
            "means": {b.code: self.means[b] for b in self.means},
            "counts": {b.code: self.counts[b] for b in self.counts},
            "ordering_holds": self.ordering_holds,
            "gap_reflect_minus_deep": self.gap_dr,
            "gap_explore_minus_reflect": self.gap_re,
            "ci_reflect_minus_deep": list(self.ci_dr),
            "ci_explore_minus_reflect": list(self.ci_re),
        }


def ordering_report(
    samples: Sequence[BondEnergySample],
    n_boot: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> OrderingReport:
    """Per-bond mean energies, the D < R < E check, and percentile bootstrap CIs on the gaps."""
    groups = {b: np.array([s.energy for s in samples if s.bond is b]) for b in BehaviorLabel}
    for b in ORDER:
        if groups[b].size == 0:
            raise InsufficientData(f"no {b.value} samples")
    means = {b: float(groups[b].mean()) for b in BehaviorLabel if groups[b].size}
    counts = {b: int(groups[b].size) for b in BehaviorLabel if groups[b].size}
    d, r, e = (means[b] for b in ORDER)

    rng = np.random.default_rng(seed)
    boot = {}
    for b in ORDER:
        x = groups[b]
        idx = rng.integers(0, x.size, size=(n_boot, x.size))
        boot[b] = x[idx].mean(axis=1)
    lo, hi = 100 * (1 - level) / 2, 100 * (1 + level) / 2
    g_dr = boot[BehaviorLabel.REFLECT] - boot[BehaviorLabel.DEEP]
    g_re = boot[BehaviorLabel.EXPLORE] - boot[BehaviorLabel.REFLECT]
    ci_dr = tuple(float(v) for v in np.percentile(g_dr, [lo, hi]))
    ci_re = tuple(float(v) for v in np.percentile(g_re, [lo, hi]))
    return OrderingReport(means, counts, d < r < e, r - d, e - r, ci_dr, ci_re)
