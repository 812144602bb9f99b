"""Gibbs-Boltzmann view of attention: weights are softmax(-energy) at T = 1."""

from __future__ import annotations

import numpy as np

from ..errors import BadConfig


def boltzmann_weights(energies, temperature: float = 1.0) -> np.ndarray:
    e = np.asarray(energies, dtype=float)
    if e.ndim != 1 or e.size == 0:
        raise BadConfig("need a non-empty 1-D vector of energies")
    if not np.all(np.isfinite(e)):
        raise BadConfig("energies must be finite")
    if temperature <= 0:
        raise BadConfig("temperature must be positive")
    z = -(e - e.min()) / temperature
    w = np.exp(z)
    return w / w.sum()


def energies_from_logits(logits) -> np.ndarray:
    """E = -s."""
    return -np.asarray(logits, dtype=float)


def logits_from_weights(weights) -> np.ndarray:
    """Recover logits from post-softmax weights up to a per-row constant.

    log w differs from the true logits by the row's log-partition, which
    cancels in every energy gap taken within a row.
    """
    w = np.asarray(weights, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(w > 0, np.log(np.where(w > 0, w, 1.0)), -np.inf)
