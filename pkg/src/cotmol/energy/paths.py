"""Soft-min (log-sum-exp) aggregation of path energies over a step DAG."""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from ..errors import BadConfig, NoPath, NotADag
from .attention import AttentionRecord, validate_spans

DEFAULT_EDGE_THRESHOLD = 0.05


@dataclass(frozen=True)
class PathGraph:
    nodes: tuple[Hashable, ...]
    edges: tuple[tuple[Hashable, Hashable, float], ...]  # (from, to, energy)

    def __post_init__(self) -> None:
        known = set(self.nodes)
        for u, v, e in self.edges:
            if u not in known or v not in known:
                raise BadConfig(f"edge ({u!r}, {v!r}) references an unknown node")
            if not math.isfinite(e):
                raise BadConfig(f"edge ({u!r}, {v!r}) has non-finite energy")

    @classmethod
    def from_json(cls, data: dict) -> "PathGraph":
        edges = tuple((u, v, float(e)) for u, v, e in data["edges"])
        nodes = data.get("nodes")
        if nodes is None:
            seen: dict = {}
            for u, v, _ in edges:
                seen.setdefault(u, None)
                seen.setdefault(v, None)
            nodes = list(seen)
        return cls(tuple(nodes), edges)

    def to_json(self) -> dict:
        return {"nodes": list(self.nodes), "edges": [list(e) for e in self.edges]}

    def topological_order(self) -> list:
        indeg = {n: 0 for n in self.nodes}
        out = defaultdict(list)
        for u, v, _ in self.edges:
            indeg[v] += 1
            out[u].append(v)
        queue = deque(n for n in self.nodes if indeg[n] == 0)
        order = []
        while queue:
            u = queue.popleft()
            order.append(u)
            for v in out[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    queue.append(v)
        if len(order) != len(self.nodes):
            raise NotADag("step graph contains a cycle")
        return order


def _logaddexp(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    hi = max(a, b)
    return hi + math.log1p(math.exp(min(a, b) - hi))


def softmin_energy(graph: PathGraph, source, target) -> float:
    """E* = -log sum_p exp(-E(p)) over all source -> target paths.

    Dynamic program over a topological order carrying
    log sum exp(-energy) of the paths reaching each node.
    """
    order = graph.topological_order()
    incoming = defaultdict(list)
    for u, v, e in graph.edges:
        incoming[v].append((u, e))
    logz = {n: -math.inf for n in graph.nodes}
    if source not in logz or target not in logz:
        raise NoPath(f"unknown endpoint {source!r} or {target!r}")
    logz[source] = 0.0
    for v in order:
        if v == source:
            continue
        acc = -math.inf
        for u, e in incoming[v]:
            if logz[u] > -math.inf:
                acc = _logaddexp(acc, logz[u] - e)
        logz[v] = acc
    if logz[target] == -math.inf:
        raise NoPath(f"no path from {source!r} to {target!r}")
    return -logz[target]


def enumerate_paths(graph: PathGraph, source, target, limit: int = 10_000) -> list[tuple[list, float]]:
    """All source -> target paths with their energies (depth-first, for small graphs)."""
    graph.topological_order()
    out_edges = defaultdict(list)
    for u, v, e in graph.edges:
        out_edges[u].append((v, e))
    paths: list[tuple[list, float]] = []
    stack = [(source, [source], 0.0)]
    while stack:
        node, path, energy = stack.pop()
        if node == target:
            paths.append((path, energy))
            if len(paths) > limit:
                raise BadConfig(f"more than {limit} paths; use softmin_energy")
            continue
        for v, e in out_edges[node]:
            stack.append((v, path + [v], energy + e))
    return paths


def path_weight_ratio(energy_p: float, energy_q: float) -> float:
    """Gibbs weight of path p relative to path q: exp(E(q) - E(p))."""
    return math.exp(energy_q - energy_p)


def build_step_graph(
    attn: AttentionRecord,
    step_spans: Sequence[Sequence[int]],
    threshold: float = DEFAULT_EDGE_THRESHOLD,
) -> PathGraph:
    """Step dependency DAG from dense attention logits.

    Edge u -> v (u earlier) exists when tokens of v attend to tokens of u with
    mean causal softmax weight above ``threshold``; its energy is the mean
    token-level energy -s over those cross-step pairs and all heads.
    """
    spans = validate_spans(step_spans, len(step_spans), attn.tokens)
    logits = attn.as_dense()
    if np.isnan(logits).any():
        raise BadConfig("step graphs need a complete (dense) attention record")
    n_tok = attn.tokens
    causal = np.tril(np.ones((n_tok, n_tok), dtype=bool))
    masked = np.where(causal[None], logits, -np.inf)
    masked = masked - masked.max(axis=2, keepdims=True)
    weights = np.exp(masked)
    weights /= weights.sum(axis=2, keepdims=True)
    w_mean = weights.mean(axis=0)
    e_mean = -logits.mean(axis=0)

    nodes = tuple(range(len(spans)))
    edges = []
    for v, (vs, ve) in enumerate(spans):
        for u in range(v):
            us, ue = spans[u]
            if w_mean[vs:ve, us:ue].mean() > threshold:
                edges.append((u, v, float(e_mean[vs:ve, us:ue].mean())))
    return PathGraph(nodes, tuple(edges))
