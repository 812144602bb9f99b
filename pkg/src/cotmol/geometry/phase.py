"""Information phase space (I_t, dI_t) and metacognitive oscillation states."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError

EXPLORATION_SLOPE = 0.6
ENTROPY_STEP = 0.05
_FLAT = 1e-12


@dataclass(frozen=True)
class PhaseTrajectory:
    I: tuple[float, ...]
    dI: tuple[float, ...]                 # dI[k] = I[k+1] - I[k]
    m: tuple[float | None, ...]           # slope for dI[k] vs dI[k-1]; m[0] is always None
    states: tuple[str, ...]               # one per dI entry

    def rows(self) -> list[dict]:
        return [
            {"t": k + 1, "I": self.I[k + 1], "dI": self.dI[k], "m": self.m[k], "state": self.states[k]}
            for k in range(len(self.dI))
        ]


def phase_trajectory(
    I,
    slope_threshold: float = EXPLORATION_SLOPE,
    entropy_threshold: float = ENTROPY_STEP,
) -> PhaseTrajectory:
    """Differences, local phase-space slopes and a state per step.

    The slope at step t is (dI_t - dI_{t-1}) / (I_t - I_{t-1}); it is left
    undefined where I_t == I_{t-1}. A step is ``exploration`` when the slope
    exceeds 0.6 and dI_t exceeds 0.05, ``validation`` when |dI_t| < 0.05, and
    ``neutral`` otherwise.
    """
    vals = np.asarray(I, dtype=float)
    if vals.ndim != 1 or vals.size < 3:
        raise ShapeError("phase trajectory needs at least 3 cumulative values")
    dI = np.diff(vals)
    m: list[float | None] = [None]
    for k in range(1, dI.size):
        m.append(None if abs(dI[k]) < _FLAT else float((dI[k] - dI[k - 1]) / dI[k]))

    states = []
    for k, gain in enumerate(dI):
        slope = m[k]
        if slope is not None and slope > slope_threshold and gain > entropy_threshold:
            states.append("exploration")
        elif abs(gain) < entropy_threshold:
            states.append("validation")
        else:
            states.append("neutral")
    return PhaseTrajectory(tuple(vals.tolist()), tuple(dI.tolist()), tuple(m), tuple(states))


def oscillations(states) -> int:
    """Number of switches between exploration and validation, skipping neutral steps."""
    seq = [s for s in states if s != "neutral"]
    return sum(a != b for a, b in zip(seq, seq[1:]))
