"""Monte Carlo checks of the rotary-position bond-energy ordering.

Queries and keys follow ``q_i = R(i) u_i``, ``k_j = R(j) v_j`` with
``E[u v^T] = rho(d) I`` at offset d, so the logit at offset d has mean
``rho(d) mu(d)`` where ``mu(d) = tr(R(d)) / sqrt(d_k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import AssumptionViolated, BadConfig
from ..seeds import derive_seed

RhoFn = Callable[[float], float]


def parse_rho(spec: str) -> RhoFn:
    """Correlation-decay family from a short spec.

    ``geom:r0,g`` -> r0 * g**d, ``exp:r0,lam`` -> r0 * exp(-lam d),
    ``power:r0,p`` -> r0 * d**-p, ``const:r0`` -> r0.
    """
    kind, _, args = spec.partition(":")
    try:
        vals = [float(x) for x in args.split(",") if x.strip()]
    except ValueError:
        raise BadConfig(f"bad rho spec {spec!r}") from None
    kind = kind.strip().lower()
    if kind == "geom" and len(vals) == 2:
        r0, g = vals
        return lambda d: r0 * g ** d
    if kind == "exp" and len(vals) == 2:
        r0, lam = vals
        return lambda d: r0 * math.exp(-lam * d)
    if kind == "power" and len(vals) == 2:
        r0, p = vals
        return lambda d: r0 * d ** (-p)
    if kind == "const" and len(vals) == 1:
        r0 = vals[0]
        return lambda d: r0
    raise BadConfig(f"bad rho spec {spec!r}")


def rotary_frequencies(d_k: int, base: float = 10000.0) -> np.ndarray:
    """theta_m = base^(-2m / d_k) for the d_k / 2 rotation planes."""
    if d_k <= 0 or d_k % 2:
        raise BadConfig("d_k must be a positive even number")
    return base ** (-2.0 * np.arange(d_k // 2) / d_k)


def mu(d: float, freqs: np.ndarray, d_k: int) -> float:
    """tr(R(d)) / sqrt(d_k) = sum_m 2 cos(d theta_m) / sqrt(d_k)."""
    return float(2.0 * np.cos(d * freqs).sum() / math.sqrt(d_k))


@dataclass
class RopeConfig:
    d_k: int = 64
    rho: RhoFn | str = "geom:0.9,0.8"
    freqs: np.ndarray | str = "rope"          # "rope", "identity", or explicit angles
    distances: Sequence[int] = (1, 4, 16)      # (d_D, d_R, d_E)
    samples: int = 100_000
    seed: int = 0
    method: str = "reduced"                    # "reduced" or "rotate"
    rho_fn: RhoFn = field(init=False, repr=False)
    angles: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.rho_fn = parse_rho(self.rho) if isinstance(self.rho, str) else self.rho
        if isinstance(self.freqs, str):
            if self.freqs == "rope":
                self.angles = rotary_frequencies(self.d_k)
            elif self.freqs == "identity":
                rotary_frequencies(self.d_k)  # validates d_k
                self.angles = np.zeros(self.d_k // 2)
            else:
                raise BadConfig(f"unknown frequency scheme {self.freqs!r}")
        else:
            self.angles = np.asarray(self.freqs, dtype=float)
            if self.angles.shape != (self.d_k // 2,) or self.d_k % 2:
                raise BadConfig("explicit frequencies need d_k / 2 angles")
        self.distances = tuple(int(d) for d in self.distances)
        if len(self.distances) < 2 or any(d <= 0 for d in self.distances) or \
                any(a >= b for a, b in zip(self.distances, self.distances[1:])):
            raise BadConfig("distances must be positive and strictly increasing")
        if self.samples < 2:
            raise BadConfig("need at least 2 samples")
        if self.method not in ("reduced", "rotate"):
            raise BadConfig(f"unknown sampling method {self.method!r}")

    def rho_at(self, d: int) -> float:
        return float(self.rho_fn(d))

    def mu_at(self, d: int) -> float:
        return mu(d, self.angles, self.d_k)

    def check_assumptions(self) -> None:
        """Raise AssumptionViolated unless rho strictly decreases within [0, 1] and mu > 0."""
        rhos = [self.rho_at(d) for d in self.distances]
        if any(not 0.0 <= r <= 1.0 for r in rhos):
            raise AssumptionViolated(f"rho values {rhos} must lie in [0, 1]")
        if any(a <= b for a, b in zip(rhos, rhos[1:])):
            raise AssumptionViolated(f"rho must be strictly decreasing over the distances, got {rhos}")
        mus = [self.mu_at(d) for d in self.distances]
        if any(m <= 0 for m in mus):
            raise AssumptionViolated(f"rotation alignment mu must be positive, got {mus}")

    def theory_sigma(self, d: int) -> float:
        """Exact standard deviation of one logit at offset d under the Gaussian model."""
        r = self.rho_at(d)
        c2 = float(np.sum(np.cos(d * self.angles) ** 2))
        return math.sqrt((4 * r * r * c2 + (1 - r * r) * self.d_k) / self.d_k)


def sample_logits(cfg: RopeConfig, d: int, n: int, rng: np.random.Generator,
                  method: str | None = None) -> np.ndarray:
    """Draw n logits s = u^T R(d) v / sqrt(d_k) with E[u v^T] = rho(d) I.

    ``rotate`` builds u, v explicitly and applies the block rotation.
    ``reduced`` samples the same law from sufficient statistics: with
    v = rho u + sqrt(1 - rho^2) w, u^T R u = sum_m cos(d theta_m) c_m where
    c_m ~ chi^2_2 is the energy of plane m, and u^T R w | u ~ N(0, |u|^2).
    """
    method = method or cfg.method
    r = cfg.rho_at(d)
    cos = np.cos(d * cfg.angles)
    root = math.sqrt(cfg.d_k)
    if method == "reduced":
        c = 2.0 * rng.standard_exponential((n, cfg.d_k // 2))
        z = rng.standard_normal(n)
        return (r * (c @ cos) + math.sqrt(1 - r * r) * np.sqrt(c.sum(axis=1)) * z) / root

    sin = np.sin(d * cfg.angles)
    out = np.empty(n)
    chunk = 20_000
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        u = rng.standard_normal((m, cfg.d_k))
        w = rng.standard_normal((m, cfg.d_k))
        v = r * u + math.sqrt(1 - r * r) * w
        va, vb = v[:, 0::2], v[:, 1::2]
        ra = cos * va - sin * vb
        rb = sin * va + cos * vb
        out[start:start + m] = (np.sum(u[:, 0::2] * ra, axis=1) + np.sum(u[:, 1::2] * rb, axis=1)) / root
    return out


@dataclass(frozen=True)
class DistanceResult:
    distance: int
    rho: float
    mu: float
    theory_logit: float
    theory_sigma: float
    mean_logit: float
    std_logit: float
    within_tolerance: bool   # |mean - theory| <= 5 std / sqrt(N)


@dataclass(frozen=True)
class RopeMCResult:
    per_distance: tuple[DistanceResult, ...]
    samples: int
    ordering_holds: bool          # negated empirical means strictly increase with distance
    theory_ordering_holds: bool
    mu_nonincreasing: bool

    def to_json(self) -> dict:
        return {
            "samples": self.samples,
            "ordering_holds": self.ordering_holds,
            "theory_ordering_holds": self.theory_ordering_holds,
            "mu_nonincreasing": self.mu_nonincreasing,
            "distances": [
                {
                    "distance": r.distance,
                    "rho": r.rho,
                    "mu": r.mu,
                    "theory_logit": r.theory_logit,
                    "theory_sigma": r.theory_sigma,
                    "mean_logit": r.mean_logit,
                    "std_logit": r.std_logit,
                    "mean_energy": -r.mean_logit,
                    "within_tolerance": r.within_tolerance,
                }
                for r in self.per_distance
            ],
        }


def rope_mc(cfg: RopeConfig) -> RopeMCResult:
    cfg.check_assumptions()
    rows = []
    for d in cfg.distances:
        rng = np.random.default_rng(derive_seed(cfg.seed, "rope-mc", d))
        s = sample_logits(cfg, d, cfg.samples, rng)
        mean = float(s.mean())
        std = float(s.std(ddof=1))
        theory = cfg.rho_at(d) * cfg.mu_at(d)
        ok = abs(mean - theory) <= 5.0 * std / math.sqrt(cfg.samples)
        rows.append(DistanceResult(d, cfg.rho_at(d), cfg.mu_at(d), theory,
                                   cfg.theory_sigma(d), mean, std, ok))
    energies = [-r.mean_logit for r in rows]
    theory_e = [-r.theory_logit for r in rows]
    mus = [r.mu for r in rows]
    return RopeMCResult(
        tuple(rows),
        cfg.samples,
        all(a < b for a, b in zip(energies, energies[1:])),
        all(a < b for a, b in zip(theory_e, theory_e[1:])),
        all(a >= b for a, b in zip(mus, mus[1:])),
    )


def sample_bound(sigma: float, epsilon: float, delta: float) -> int:
    """Samples per distance so all empirical means order correctly w.p. >= 1 - delta.

    N = ceil(2 sigma^2 / epsilon^2 * ln(4 / delta)). The guarantee needs
    epsilon below half the smaller expected logit gap, which is left to
    the caller.
    """
    if not sigma > 0 or not epsilon > 0:
        raise BadConfig("sigma and epsilon must be positive")
    if not 0 < delta < 1:
        raise BadConfig("delta must lie in (0, 1)")
    return math.ceil(2.0 * sigma ** 2 / epsilon ** 2 * math.log(4.0 / delta))


def concentration_radius(sigma: float, n: int, delta: float) -> float:
    """epsilon = sigma sqrt(2 ln(6 / delta) / N), the simultaneous 3-distance radius."""
    return sigma * math.sqrt(2.0 * math.log(6.0 / delta) / n)


def ordering_failure_rate(
    mean_logits: Sequence[float],
    sigma: float,
    n: int,
    experiments: int = 1000,
    seed: int = 0,
) -> float:
    """Fraction of experiments whose empirical energies fail to keep the expected order.

    Each experiment draws ``n`` Gaussian logits with standard deviation
    ``sigma`` around each expected logit and checks -mean_0 < -mean_1 < ...
    """
    means = np.asarray(mean_logits, dtype=float)
    failures = 0
    for k in range(experiments):
        rng = np.random.default_rng(derive_seed(seed, "ordering", k))
        draws = means[:, None] + sigma * rng.standard_normal((means.size, n))
        energies = -draws.mean(axis=1)
        if not np.all(np.diff(energies) > 0):
            failures += 1
    return failures / experiments
