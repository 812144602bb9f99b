"""Logic clusters and per-edge folding metrics in an embedding space."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..errors import BadConfig, DegenerateGeometry, ShapeError
from ..trace import BehaviorLabel, LabeledTrace

ALPHA_FRACTION = 0.02
DEFAULT_GROUP_LIMIT = 3.0


@dataclass(frozen=True)
class EmbeddingSequence:
    trace_id: str
    vectors: np.ndarray  # (steps, d)

    def __post_init__(self) -> None:
        v = np.asarray(self.vectors, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 2:
            raise ShapeError(f"{self.trace_id}: vectors must be an (n, d>=2) array, got {v.shape}")
        object.__setattr__(self, "vectors", v)

    def __len__(self) -> int:
        return self.vectors.shape[0]


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def adaptive_alpha(points) -> float:
    """0.02 x (largest - smallest) pairwise distance, ignoring coincident pairs."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise DegenerateGeometry("adaptive alpha needs at least 2 points")
    D = pairwise_distances(pts)
    iu = np.triu_indices(pts.shape[0], k=1)
    d = D[iu]
    d = d[d > 0]
    if d.size == 0:
        raise DegenerateGeometry("all points coincide; supply alpha explicitly")
    alpha = ALPHA_FRACTION * float(d.max() - d.min())
    if alpha <= 0:
        raise DegenerateGeometry("max and min pairwise distance coincide; supply alpha explicitly")
    return alpha


@dataclass(frozen=True)
class ClusterSet:
    assignment: np.ndarray  # step index -> cluster id
    alpha: float
    beta: float
    adjacency: frozenset  # {(a, b)} with a < b

    @property
    def n_clusters(self) -> int:
        return int(self.assignment.max()) + 1 if self.assignment.size else 0

    def neighbors(self) -> dict[int, list[int]]:
        nbrs: dict[int, list[int]] = {c: [] for c in range(self.n_clusters)}
        for a, b in sorted(self.adjacency):
            nbrs[a].append(b)
            nbrs[b].append(a)
        return nbrs

    def hops(self, a: int, b: int) -> float:
        """Shortest-path length between two clusters; inf when disconnected."""
        if a == b:
            return 0.0
        nbrs = self.neighbors()
        dist = {a: 0}
        queue = deque([a])
        while queue:
            u = queue.popleft()
            for v in nbrs[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    if v == b:
                        return float(dist[v])
                    queue.append(v)
        return math.inf


def cluster(points, alpha: float, beta: float | None = None) -> ClusterSet:
    """Single-linkage grouping at threshold ``alpha``.

    Points closer than ``alpha`` are merged transitively (connected
    components of the proximity graph). Two resulting clusters are adjacent
    when their closest cross pair is below ``beta`` (default ``2 * alpha``).
    Cluster ids follow the first step that lands in each cluster.
    """
    if alpha <= 0:
        raise BadConfig("alpha must be positive")
    beta = 2.0 * alpha if beta is None else beta
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    D = pairwise_distances(pts)

    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in zip(*np.nonzero(np.triu(D < alpha, k=1))):
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    ids: dict[int, int] = {}
    assignment = np.empty(n, dtype=np.int64)
    for i in range(n):
        assignment[i] = ids.setdefault(find(i), len(ids))

    k = len(ids)
    adjacency = set()
    for a in range(k):
        ma = assignment == a
        for b in range(a + 1, k):
            mb = assignment == b
            if D[np.ix_(ma, mb)].min() < beta:
                adjacency.add((a, b))
    return ClusterSet(assignment, float(alpha), float(beta), frozenset(adjacency))


@dataclass(frozen=True)
class EdgeFolding:
    edge: int
    label: BehaviorLabel
    d: float              # step displacement, also the novelty distance
    r: float | None       # return distance to earlier history; None when empty
    r_argmin: int | None
    reconnects: bool
    g: float              # cluster-graph hops, inf if disconnected

    @property
    def novelty(self) -> float:
        return self.d

    def as_row(self) -> dict:
        return {
            "edge": self.edge,
            "label": self.label.code,
            "d": self.d,
            "r": self.r,
            "r_argmin": self.r_argmin,
            "reconnects": self.reconnects,
            "g": None if math.isinf(self.g) else self.g,
            "novelty": self.d,
        }


def folding_metrics(
    labeled: LabeledTrace,
    emb: EmbeddingSequence | np.ndarray,
    clusters: ClusterSet,
    include_current: bool = False,
) -> list[EdgeFolding]:
    """Per-edge geometry for edge ``t`` from step ``t`` to step ``t+1``.

    The return distance is the closest approach of step ``t+1`` to the steps
    strictly before step ``t``; ``include_current=True`` also admits step
    ``t`` itself. Reconnection means that distance is below the cluster
    threshold alpha.
    """
    H = emb.vectors if isinstance(emb, EmbeddingSequence) else np.asarray(emb, dtype=float)
    T = len(labeled.trace.steps)
    if H.shape[0] != T or clusters.assignment.shape[0] != T:
        raise ShapeError(f"{T} steps but {H.shape[0]} embeddings / "
                         f"{clusters.assignment.shape[0]} cluster assignments")
    out = []
    for t, label in enumerate(labeled.edge_labels):
        nxt = H[t + 1]
        d = float(np.linalg.norm(nxt - H[t]))
        history = H[: t + 1] if include_current else H[:t]
        if len(history):
            dists = np.linalg.norm(history - nxt, axis=1)
            s = int(np.argmin(dists))
            r: float | None = float(dists[s])
            r_arg: int | None = s
        else:
            r, r_arg = None, None
        reconnects = r is not None and r < clusters.alpha
        g = clusters.hops(int(clusters.assignment[t]), int(clusters.assignment[t + 1]))
        out.append(EdgeFolding(t, label, d, r, r_arg, reconnects, g))
    return out


def folding_summary(records, group_limit: float = DEFAULT_GROUP_LIMIT) -> dict:
    """Corpus aggregates of the folding statistics.

    - share of reflection edges that reconnect,
    - share of deep edges with d < g < ``group_limit``,
    - mean exploration displacement.
    """
    refl = [r for r in records if r.label is BehaviorLabel.REFLECT]
    deep = [r for r in records if r.label is BehaviorLabel.DEEP]
    expl = [r for r in records if r.label is BehaviorLabel.EXPLORE]
    return {
        "reflect_edges": len(refl),
        "reflect_reconnect_share": (sum(r.reconnects for r in refl) / len(refl)) if refl else None,
        "deep_edges": len(deep),
        "deep_local_share": (sum(r.d < r.g < group_limit for r in deep) / len(deep)) if deep else None,
        "explore_edges": len(expl),
        "explore_mean_d": float(np.mean([r.d for r in expl])) if expl else None,
        "group_limit": group_limit,
    }
