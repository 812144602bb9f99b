"""Behavior transition graphs ("transfer graphs") over bond labels."""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    BadConfig,
    DegenerateCorrelation,
    EmptyCorpus,
    InsufficientData,
    NotErgodic,
    ShapeError,
)
from .seeds import derive_seed
from .trace import BEHAVIOR_CODES, BehaviorLabel, LabeledTrace


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic ``p[source, target]`` with the counts it came from.

    Rows without evidence are stored uniform and listed in ``empty_rows``.
    """

    p: np.ndarray
    counts: np.ndarray
    labels: tuple[str, ...] = BEHAVIOR_CODES
    empty_rows: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float)
        k = len(self.labels)
        if p.shape != (k, k) or np.shape(self.counts) != (k, k):
            raise ShapeError(f"transition matrix must be {k}x{k}, got {p.shape}")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-9):
            raise BadConfig("transition rows must be non-negative and sum to 1")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "counts", np.asarray(self.counts))

    @classmethod
    def from_probabilities(cls, p, labels: Sequence[str] = BEHAVIOR_CODES) -> "TransitionMatrix":
        p = np.asarray(p, dtype=float)
        return cls(p, np.zeros(p.shape, dtype=np.int64), tuple(labels))

    def index(self, label: "str | BehaviorLabel") -> int:
        if isinstance(label, str) and label in self.labels:
            return self.labels.index(label)
        return self.labels.index(BehaviorLabel.parse(label).code)

    def to_json(self, pi: "np.ndarray | None" = None) -> dict:
        out = {
            "labels": list(self.labels),
            "p": self.p.tolist(),
            "counts": np.asarray(self.counts).tolist(),
        }
        if pi is not None:
            out["pi"] = np.asarray(pi, dtype=float).tolist()
        return out

    @classmethod
    def from_json(cls, data: dict) -> "TransitionMatrix":
        labels = tuple(data.get("labels", BEHAVIOR_CODES))
        counts = data.get("counts")
        if counts is None:
            counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
        return cls(np.asarray(data["p"], dtype=float), np.asarray(counts), labels)


def _as_matrix(P) -> np.ndarray:
    return P.p if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=float)


def _label_sequences(corpus) -> Iterable[list[int]]:
    for item in corpus:
        labels = item.edge_labels if isinstance(item, LabeledTrace) else item
        yield [BehaviorLabel.parse(lb).code for lb in labels]


def estimate(
    corpus: Iterable["LabeledTrace | Sequence[BehaviorLabel | str]"],
    smoothing: float = 0.0,
    behaviors: Sequence[str] = BEHAVIOR_CODES,
) -> tuple[TransitionMatrix, np.ndarray]:
    """Transition matrix and edge-label marginal of a labeled corpus.

    Pairs of consecutive edge labels are counted within each trace only.
    ``behaviors`` restricts the state space; labels outside it break the
    chain (no pair is counted across them).
    """
    if smoothing < 0:
        raise BadConfig("smoothing must be non-negative")
    behaviors = tuple(BehaviorLabel.parse(b).code for b in behaviors)
    k = len(behaviors)
    idx = {code: i for i, code in enumerate(behaviors)}
    counts = np.zeros((k, k), dtype=np.int64)
    marginal = np.zeros(k, dtype=np.int64)

    for seq in _label_sequences(corpus):
        prev = None
        for code in seq:
            cur = idx.get(code)
            if cur is not None:
                marginal[cur] += 1
                if prev is not None:
                    counts[prev, cur] += 1
            prev = cur

    if marginal.sum() == 0 or counts.sum() == 0:
        raise EmptyCorpus("corpus has no consecutive edge pairs to estimate transitions from")

    smoothed = counts + smoothing
    row_tot = smoothed.sum(axis=1)
    empty = tuple(int(i) for i in np.flatnonzero(row_tot == 0))
    p = np.empty((k, k))
    for i in range(k):
        p[i] = smoothed[i] / row_tot[i] if row_tot[i] > 0 else 1.0 / k
    pi = marginal / marginal.sum()
    return TransitionMatrix(p, counts, behaviors, empty), pi


class Ergodicity(NamedTuple):
    ergodic: bool
    diagnostic: str
    period: int = 0


def is_ergodic(P) -> Ergodicity:
    """Strong connectivity plus aperiodicity of the support graph of P."""
    p = _as_matrix(P)
    k = p.shape[0]
    adj = p > 0

    def reach(a: np.ndarray) -> set[int]:
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in np.flatnonzero(a[u]):
                if v not in seen:
                    seen.add(int(v))
                    queue.append(int(v))
        return seen

    if len(reach(adj)) < k or len(reach(adj.T)) < k:
        return Ergodicity(False, "reducible: support graph is not strongly connected")

    # BFS levels; the period is the gcd of level[u] + 1 - level[v] over edges
    level = {0: 0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adj[u]):
            if int(v) not in level:
                level[int(v)] = level[u] + 1
                queue.append(int(v))
    period = 0
    for u, v in zip(*np.nonzero(adj)):
        period = math.gcd(period, abs(level[int(u)] + 1 - level[int(v)]))
    if period != 1:
        return Ergodicity(False, f"periodic with period {period}", period)
    return Ergodicity(True, "irreducible and aperiodic", 1)


def stationary(P, tol: float = 1e-13, max_iter: int = 1_000_000) -> np.ndarray:
    """Stationary distribution by power iteration from the uniform vector."""
    p = _as_matrix(P)
    check = is_ergodic(p)
    if not check.ergodic:
        raise NotErgodic(check.diagnostic)
    k = p.shape[0]
    pi = np.full(k, 1.0 / k)
    for _ in range(max_iter):
        nxt = pi @ p
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) <= tol:
            pi = nxt
            break
        pi = nxt
    return pi


def pearson(P, Q) -> float:
    """Pearson correlation of the two matrices flattened entrywise."""
    p = _as_matrix(P).ravel()
    q = _as_matrix(Q).ravel()
    if p.shape != q.shape:
        raise ShapeError(f"cannot correlate {p.size} entries with {q.size}")
    dp = p - p.mean()
    dq = q - q.mean()
    sp = math.sqrt(float(dp @ dp))
    sq = math.sqrt(float(dq @ dq))
    if sp == 0.0 or sq == 0.0:
        raise DegenerateCorrelation("flattened matrix has zero variance")
    r = float(dp @ dq) / (sp * sq)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class StabilityPoint:
    sample_size: int
    mean_pearson: float
    std: float
    trials: int


@dataclass(frozen=True)
class StabilityCurve:
    points: tuple[StabilityPoint, ...] = field(default=())

    def rows(self) -> list[dict]:
        return [
            {"sample_size": pt.sample_size, "mean_pearson": pt.mean_pearson,
             "std": pt.std, "trials": pt.trials}
            for pt in self.points
        ]


def stability_curve(
    corpus: Sequence,
    sizes: Sequence[int],
    trials: int = 5,
    seed: int = 0,
    smoothing: float = 0.0,
) -> StabilityCurve:
    """Mean/std of pairwise Pearson between transfer graphs of random subsamples.

    Each of the ``trials`` subsamples of a given size is drawn without
    replacement (in units of traces) with its own seed derived from ``seed``.
    """
    if trials < 2:
        raise BadConfig("need at least 2 trials to correlate")
    sizes = list(sizes)
    if sorted(set(sizes)) != sizes:
        raise BadConfig("sample sizes must be strictly increasing")
    n = len(corpus)
    points = []
    for size in sizes:
        if size > n or size < 1:
            raise InsufficientData(f"sample size {size} exceeds corpus of {n} traces")
        mats = []
        for t in range(trials):
            rng = np.random.default_rng(derive_seed(seed, "stability", size, t))
            pick = rng.choice(n, size=size, replace=False)
            mats.append(estimate([corpus[i] for i in pick], smoothing)[0])
        rs = [pearson(a, b) for a, b in itertools.combinations(mats, 2)]
        points.append(StabilityPoint(size, float(np.mean(rs)), float(np.std(rs)), trials))
    return StabilityCurve(tuple(points))


def restrict(tm: TransitionMatrix, behaviors: Sequence[str]) -> TransitionMatrix:
    """Sub-chain on ``behaviors`` with rows renormalized over the kept columns."""
    keep = [tm.index(b) for b in behaviors]
    counts = np.asarray(tm.counts)[np.ix_(keep, keep)]
    sub = tm.p[np.ix_(keep, keep)]
    p = np.empty_like(sub)
    empty = []
    for i, row in enumerate(sub):
        s = row.sum()
        if s > 0:
            p[i] = row / s
        else:
            p[i] = 1.0 / len(keep)
            empty.append(i)
    return TransitionMatrix(p, counts, tuple(tm.labels[i] for i in keep), tuple(empty))


def override(
    tm: TransitionMatrix,
    target: "str | BehaviorLabel",
    prob: float,
    sources: "Sequence[str | BehaviorLabel] | None" = None,
) -> TransitionMatrix:
    """Force ``P(target | b) = prob`` for each source row ``b``.

    The remaining mass is rescaled proportionally; a row that had all its
    mass on ``target`` spreads the remainder uniformly.
    """
    if not 0.0 <= prob <= 1.0:
        raise BadConfig(f"override probability {prob} outside [0, 1]")
    j = tm.index(target)
    rows = range(len(tm.labels)) if sources is None else [tm.index(s) for s in sources]
    p = tm.p.copy()
    for i in rows:
        rest = p[i].sum() - p[i, j]
        others = [c for c in range(p.shape[1]) if c != j]
        if rest > 0:
            p[i, others] *= (1.0 - prob) / rest
        else:
            p[i, others] = (1.0 - prob) / len(others)
        p[i, j] = prob
    return TransitionMatrix(p, tm.counts, tm.labels, tm.empty_rows)


def simulate_labels(P, n_steps: int, rng: np.random.Generator, start: int | None = None) -> np.ndarray:
    """State indices of a chain realization of length ``n_steps``.

    Successors are pre-drawn per source state in bulk; the k-th visit to a
    state consumes that state's k-th draw, which gives the same law as
    drawing on the fly.
    """
    p = _as_matrix(P)
    k = p.shape[0]
    if n_steps < 1:
        return np.empty(0, dtype=np.int64)
    cdf = np.cumsum(p, axis=1)
    cdf[:, -1] = 1.0
    succ = [np.searchsorted(cdf[s], rng.random(n_steps), side="right").tolist() for s in range(k)]
    used = [0] * k
    state = int(rng.integers(k)) if start is None else int(start)
    out = [state]
    for _ in range(n_steps - 1):
        nxt = succ[state][used[state]]
        used[state] += 1
        state = nxt
        out.append(state)
    return np.asarray(out, dtype=np.int64)


def total_variation(a, b) -> float:
    return 0.5 * float(np.abs(np.asarray(a, float) - np.asarray(b, float)).sum())
