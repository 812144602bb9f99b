"""Time-averaged bond energy of a behavior chain, and Gibbs routing preference."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..bondgraph import _as_matrix, simulate_labels, stationary
from ..errors import BadConfig
from .boltzmann import boltzmann_weights


@dataclass(frozen=True)
class ErgodicResult:
    E_hat: float               # trajectory mean energy
    E_decomposed: float        # sum_b freq_b * conditional mean_b (equals E_hat)
    E_limit: float             # sum_b pi_b mu_b
    gap: float                 # |E_hat - E_limit|
    sigma_eff: float           # asymptotic std of sqrt(T) (E_hat - E_limit)
    frequencies: np.ndarray
    conditional_means: np.ndarray
    pi: np.ndarray
    T: int

    @property
    def tv_to_stationary(self) -> float:
        return 0.5 * float(np.abs(self.frequencies - self.pi).sum())

    def to_json(self) -> dict:
        return {
            "T": self.T,
            "E_hat": self.E_hat,
            "E_decomposed": self.E_decomposed,
            "E_limit": self.E_limit,
            "gap": self.gap,
            "sigma_eff": self.sigma_eff,
            "bound_3sigma": 3 * self.sigma_eff / math.sqrt(self.T),
            "tv_to_stationary": self.tv_to_stationary,
            "frequencies": self.frequencies.tolist(),
            "conditional_means": [None if math.isnan(x) else x for x in self.conditional_means],
            "pi": self.pi.tolist(),
        }


def asymptotic_sigma(P, mu, spread) -> float:
    """sqrt of lim T Var(E_hat_T) for the chain started in equilibrium.

    Within-state noise contributes sum_b pi_b spread_b^2; the Markov-modulated
    mean contributes 2 <f, Z f>_pi - <f, f>_pi with f = mu - pi.mu and
    fundamental matrix Z = (I - P + 1 pi^T)^-1.
    """
    p = _as_matrix(P)
    pi = stationary(p)
    mu = np.asarray(mu, dtype=float)
    spread = np.asarray(spread, dtype=float)
    f = mu - pi @ mu
    k = p.shape[0]
    Z = np.linalg.inv(np.eye(k) - p + np.outer(np.ones(k), pi))
    markov = 2.0 * float(pi @ (f * (Z @ f))) - float(pi @ (f * f))
    noise = float(pi @ (spread ** 2))
    return math.sqrt(max(markov, 0.0) + noise)


def ergodic_energy_sim(
    P,
    mu: Sequence[float],
    spread: Sequence[float],
    T: int,
    seed: int = 0,
    start: int | None = None,
) -> ErgodicResult:
    """Simulate the behavior chain and one energy per step.

    ``E_t ~ Normal(mu[s_t], spread[s_t])`` independently given the state.
    The chain starts from a draw of its stationary law unless ``start`` is
    given.
    """
    p = _as_matrix(P)
    k = p.shape[0]
    mu = np.asarray(mu, dtype=float)
    spread = np.asarray(spread, dtype=float)
    if mu.shape != (k,) or spread.shape != (k,):
        raise BadConfig(f"mu and spread need one entry per behavior ({k})")
    if np.any(spread < 0):
        raise BadConfig("spread must be non-negative")
    if T < 2:
        raise BadConfig("T must be at least 2")
    pi = stationary(p)
    rng = np.random.default_rng(seed)
    if start is None:
        start = int(rng.choice(k, p=pi))
    states = simulate_labels(p, T, rng, start=start)
    energies = mu[states] + spread[states] * rng.standard_normal(T)

    counts = np.bincount(states, minlength=k)
    freqs = counts / T
    sums = np.bincount(states, weights=energies, minlength=k)
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    decomposed = float(np.nansum(freqs * np.nan_to_num(cond)))
    e_hat = float(energies.mean())
    limit = float(pi @ mu)
    return ErgodicResult(
        e_hat, decomposed, limit, abs(e_hat - limit),
        asymptotic_sigma(p, mu, spread), freqs, cond, pi, T,
    )


def routing_bound(mu_b: float, mu_c: float, half_width: float) -> float:
    """Lower bound exp((mu_c - mu_b) - 2 delta) on the b-over-c routing preference."""
    if half_width < 0:
        raise BadConfig("half width must be non-negative")
    return math.exp((mu_c - mu_b) - 2.0 * half_width)


def routing_ratio(energies_b: Sequence[float], energies_c: Sequence[float],
                  others: Sequence[float] = ()) -> float:
    """Per-candidate Boltzmann preference of class b over class c.

    Ratio of the mean attention weight a class-b candidate receives to the
    mean weight of a class-c candidate, all candidates sharing one softmax.
    """
    eb, ec, eo = list(energies_b), list(energies_c), list(others)
    w = boltzmann_weights(np.array(eb + ec + eo))
    nb, nc = len(eb), len(ec)
    return float(w[:nb].mean() / w[nb:nb + nc].mean())


def routing_check(
    mu_b: float,
    mu_c: float,
    half_width: float,
    trials: int = 10_000,
    seed: int = 0,
    max_per_class: int = 5,
) -> tuple[float, float]:
    """Fraction of random candidate sets whose realized ratio meets the bound, and the worst ratio/bound.

    Energies are drawn uniformly inside [mu - delta, mu + delta] per class,
    plus a few distractor candidates of arbitrary energy.
    """
    bound = routing_bound(mu_b, mu_c, half_width)
    rng = np.random.default_rng(seed)
    ok = 0
    worst = math.inf
    for _ in range(trials):
        nb, nc, no = rng.integers(1, max_per_class + 1, size=2).tolist() + [int(rng.integers(0, 4))]
        eb = rng.uniform(mu_b - half_width, mu_b + half_width, nb)
        ec = rng.uniform(mu_c - half_width, mu_c + half_width, nc)
        eo = rng.normal(0.5 * (mu_b + mu_c), 2.0, no)
        ratio = routing_ratio(eb, ec, eo)
        worst = min(worst, ratio / bound)
        ok += ratio >= bound * (1 - 1e-12)
    return ok / trials, worst
