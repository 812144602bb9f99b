"""Exact t-SNE with cosine input distances.

No Barnes-Hut approximation: all O(N^2) affinities are formed explicitly,
which is fine for the few thousand step embeddings of a trace sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BadConfig

DEFAULT_PERPLEXITY = 30.0
EXAGGERATION_ITERS = 250
_MIN_GAIN = 0.01


@dataclass(frozen=True)
class TsneResult:
    embedding: np.ndarray
    kl_initial: float
    kl_after_exaggeration: float
    kl_final: float
    perplexity: float
    iterations: int


def cosine_distances(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise BadConfig("cosine distance is undefined for zero vectors")
    Xn = X / norms[:, None]
    D = 1.0 - Xn @ Xn.T
    np.fill_diagonal(D, 0.0)
    return np.clip(D, 0.0, 2.0)


def _row_affinities(dist: np.ndarray, perplexity: float, tol: float = 1e-5, max_tries: int = 100):
    """Binary search on the kernel precision so the row hits the target entropy."""
    target = np.log(perplexity)
    beta, lo, hi = 1.0, -np.inf, np.inf
    d = dist - dist.min()  # shift for stability; cancels after normalization
    for _ in range(max_tries):
        w = np.exp(-d * beta)
        s = w.sum()
        p = w / s
        h = np.log(s) + beta * float(d @ p)
        diff = h - target
        if abs(diff) < tol:
            break
        if diff > 0:
            lo = beta
            beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
        else:
            hi = beta
            beta = beta / 2.0 if lo == -np.inf else (beta + lo) / 2.0
    return p


def joint_probabilities(D: np.ndarray, perplexity: float) -> np.ndarray:
    n = D.shape[0]
    P = np.zeros((n, n))
    for i in range(n):
        others = np.r_[0:i, i + 1:n]
        P[i, others] = _row_affinities(D[i, others], perplexity)
    P = P + P.T
    P /= P.sum()
    return np.maximum(P, 1e-12 * (1 - np.eye(n)))


def _q_and_num(Y: np.ndarray):
    sq = np.sum(Y * Y, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (Y @ Y.T), 0.0)
    num = 1.0 / (1.0 + d2)
    np.fill_diagonal(num, 0.0)
    Q = np.maximum(num / num.sum(), 1e-12)
    return Q, num


def kl_divergence(P: np.ndarray, Y: np.ndarray) -> float:
    Q, _ = _q_and_num(Y)
    mask = ~np.eye(P.shape[0], dtype=bool)
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))


def tsne(
    X,
    dim: int = 3,
    iters: int = 5000,
    early_exaggeration: float = 12.0,
    perplexity: float | None = None,
    seed: int = 0,
    learning_rate: float | None = None,
) -> TsneResult:
    """Embed the rows of ``X`` into ``dim`` dimensions.

    Gradient descent with momentum (0.5 during the first 250 iterations, then
    0.8) and per-coordinate adaptive gains. The first 250 iterations also
    multiply P by ``early_exaggeration``. ``perplexity=None`` means 30 capped
    at (N - 1) / 3.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise BadConfig("t-SNE input must be a 2-D array")
    n = X.shape[0]
    if n < 4:
        raise BadConfig(f"t-SNE needs at least 4 points, got {n}")
    if dim not in (2, 3):
        raise BadConfig("output dimension must be 2 or 3")
    if iters < 0 or early_exaggeration <= 0:
        raise BadConfig("iters must be >= 0 and early_exaggeration > 0")
    cap = (n - 1) / 3.0
    if perplexity is None:
        perplexity = min(DEFAULT_PERPLEXITY, cap)
    elif perplexity <= 0 or perplexity > cap:
        raise BadConfig(f"perplexity {perplexity} infeasible for {n} points (max {cap:.3g})")
    if learning_rate is None:
        learning_rate = max(n / early_exaggeration / 4.0, 50.0)

    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((n, dim)) * 1e-4
    P = joint_probabilities(cosine_distances(X), perplexity)
    kl0 = kl_divergence(P, Y)
    if iters == 0:
        return TsneResult(Y, kl0, kl0, kl0, perplexity, 0)

    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    kl_mid = kl0
    for it in range(iters):
        exaggerated = it < EXAGGERATION_ITERS
        momentum = 0.5 if exaggerated else 0.8
        Pe = P * early_exaggeration if exaggerated else P
        Q, num = _q_and_num(Y)
        W = (Pe - Q) * num
        grad = 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)
        same_sign = (grad > 0) == (update > 0)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, _MIN_GAIN, out=gains)
        update = momentum * update - learning_rate * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)
        if it + 1 == EXAGGERATION_ITERS:
            kl_mid = kl_divergence(P, Y)
    kl_final = kl_divergence(P, Y)
    if iters < EXAGGERATION_ITERS:
        kl_mid = kl_final
    return TsneResult(Y, kl0, kl_mid, kl_final, perplexity, iters)


def tsne_reduce(X, dim: int = 3, iters: int = 5000, early_exaggeration: float = 12.0,
                perplexity: float | None = None, seed: int = 0) -> np.ndarray:
    return tsne(X, dim, iters, early_exaggeration, perplexity, seed).embedding
