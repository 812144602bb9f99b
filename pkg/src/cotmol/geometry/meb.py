"""Minimum enclosing balls and the volume statistics built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import BadConfig, DegenerateGeometry

_EPS = 1e-12


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def contains(self, p: np.ndarray, tol: float = 1e-9) -> bool:
        return float(np.linalg.norm(p - self.center)) <= self.radius + tol


def circumball(support: np.ndarray) -> Ball:
    """Smallest ball with every support point on its boundary.

    The center lies in the affine hull of the support; affinely dependent
    supports fall back to a least-squares solution.
    """
    p0 = support[0]
    if len(support) == 1:
        return Ball(p0.copy(), 0.0)
    V = support[1:] - p0
    G = V @ V.T
    rhs = 0.5 * np.sum(V * V, axis=1)
    try:
        lam = np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError:
        lam = np.linalg.lstsq(G, rhs, rcond=None)[0]
    center = p0 + lam @ V
    radius = max(float(np.linalg.norm(support - center, axis=1).max()), 0.0)
    return Ball(center, radius)


def _inside(p: np.ndarray, ball: Ball | None) -> bool:
    if ball is None:
        return False
    scale = max(1.0, ball.radius)
    return float(np.linalg.norm(p - ball.center)) <= ball.radius + _EPS * scale


def _welzl(points: np.ndarray, n: int, support: list[np.ndarray], dim: int) -> Ball | None:
    # Loop form of Welzl's recursion: depth is bounded by dim + 1.
    ball = circumball(np.array(support)) if support else None
    if len(support) == dim + 1:
        return ball
    for i in range(n):
        if not _inside(points[i], ball):
            ball = _welzl(points, i, support + [points[i]], dim)
    return ball


def meb(points, seed: int = 0) -> Ball:
    """Exact minimum enclosing ball of a point set in any dimension.

    Points are visited in a seeded random order, which gives expected
    linear time; the radius does not depend on the order.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[0] == 0:
        raise DegenerateGeometry("minimum enclosing ball of an empty set")
    rng = np.random.default_rng(seed)
    shuffled = pts[rng.permutation(pts.shape[0])]
    ball = _welzl(shuffled, shuffled.shape[0], [], pts.shape[1])
    assert ball is not None
    return ball


def unit_ball_volume(dim: int) -> float:
    if dim < 1:
        raise BadConfig("dimension must be positive")
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)


def volume(ball: Ball, dim: int | None = None) -> float:
    """C_d r^d with C_2 = pi and C_3 = 4 pi / 3."""
    dim = ball.center.shape[0] if dim is None else dim
    return unit_ball_volume(dim) * ball.radius ** dim


def volume_delta(v_base: float, v_mode: float, direction: str = "reduction") -> float:
    """Percentage volume change relative to the baseline.

    ``reduction``: (base - mode) / base x 100, used for the deep-reasoning
    and reflection contractions. ``expansion``: (mode - base) / base x 100.
    """
    if not v_base > 0:
        raise BadConfig("baseline volume must be positive")
    if direction == "reduction":
        return (v_base - v_mode) / v_base * 100.0
    if direction == "expansion":
        return (v_mode - v_base) / v_base * 100.0
    raise BadConfig(f"direction must be 'reduction' or 'expansion', not {direction!r}")
