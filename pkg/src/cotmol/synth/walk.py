"""Random-walk synthesis of long chain-of-thought traces over a transfer graph."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from ..bondgraph import TransitionMatrix, pearson, total_variation
from ..errors import BadConfig, ClientError, MalformedAnswer
from ..seeds import derive_seed
from ..trace import BehaviorLabel, LabeledTrace, Trace, extract_boxed
from .prompts import render_behavior_prompt

logger = logging.getLogger(__name__)

Generator = Callable[[str], str]

# decoding defaults used when a generation client is built for synthesis
SAMPLING_DEFAULTS = {"temperature": 0.6, "top_p": 0.95, "max_tokens": 16384}


@dataclass(frozen=True)
class SynthesisConfig:
    transition: TransitionMatrix
    start: BehaviorLabel = BehaviorLabel.EXPLORE
    max_steps: int = 32
    stop_on_boxed: bool = True
    seed: int = 0
    rationale_window: int | None = None   # most recent steps shown to the model; None = all

    def __post_init__(self) -> None:
        p = self.transition.p
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-9):
            raise BadConfig("every transition row must be a probability distribution")
        if self.max_steps < 1:
            raise BadConfig("max_steps must be at least 1")
        if self.rationale_window is not None and self.rationale_window < 0:
            raise BadConfig("rationale_window must be non-negative")
        object.__setattr__(self, "start", BehaviorLabel.parse(self.start))
        self.transition.index(self.start)


def sample_walk(config: SynthesisConfig, rng: np.random.Generator | None = None) -> list[BehaviorLabel]:
    """Behavior sequence of length ``max_steps`` starting at ``config.start``."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    tm = config.transition
    cdf = np.cumsum(tm.p, axis=1)
    cdf[:, -1] = 1.0
    state = tm.index(config.start)
    states = [state]
    for _ in range(config.max_steps - 1):
        state = int(np.searchsorted(cdf[state], rng.random(), side="right"))
        states.append(state)
    return [BehaviorLabel.parse(tm.labels[s]) for s in states]


@dataclass(frozen=True)
class SyntheticTrace:
    question: str
    steps: tuple[tuple[BehaviorLabel, str], ...]
    terminated_by: str                      # "boxed" | "max_steps" | "client_failure"
    final_answer: str | None = None
    seed: int = 0

    @property
    def behaviors(self) -> list[BehaviorLabel]:
        return [b for b, _ in self.steps]

    def to_json(self) -> dict:
        out = {
            "question": self.question,
            "steps": [{"behavior": b.value, "text": t} for b, t in self.steps],
        }
        if self.final_answer is not None:
            out["final_answer"] = self.final_answer
        out["terminated_by"] = self.terminated_by
        out["seed"] = self.seed
        return out

    @classmethod
    def from_json(cls, data: dict) -> "SyntheticTrace":
        steps = tuple((BehaviorLabel.parse(s["behavior"]), s["text"]) for s in data["steps"])
        return cls(data["question"], steps, data["terminated_by"], data.get("final_answer"),
                   int(data.get("seed", 0)))

    def to_trace(self, trace_id: str) -> Trace:
        return Trace.from_texts(trace_id, self.question, [t for _, t in self.steps], self.final_answer)

    def to_labeled(self, trace_id: str) -> LabeledTrace:
        """Edge t carries the behavior the walk assigned to step t+1."""
        return LabeledTrace(self.to_trace(trace_id), tuple(self.behaviors[1:]))


def _rationale(texts: Sequence[str], window: int | None) -> str:
    if window is not None:
        texts = texts[len(texts) - window:] if window else []
    return "\n\n".join(texts)


def synthesize(
    question: str,
    config: SynthesisConfig,
    client: Generator,
    rng: np.random.Generator | None = None,
) -> SyntheticTrace:
    """Generate one trace by prompting ``client`` once per walk step.

    Each prompt carries the question, the rationale so far and the
    behavior directive. Generation stops at the first response holding a
    boxed answer (when ``stop_on_boxed``), at ``max_steps``, or when the
    client gives up, in which case the partial trace is returned.
    """
    walk = sample_walk(config, rng)
    steps: list[tuple[BehaviorLabel, str]] = []
    texts: list[str] = []
    for behavior in walk:
        prompt = render_behavior_prompt(behavior, question, _rationale(texts, config.rationale_window))
        try:
            response = client(prompt)
        except ClientError as exc:
            logger.warning("client failed at step %d: %s", len(steps), exc)
            return SyntheticTrace(question, tuple(steps), "client_failure", None, config.seed)
        steps.append((behavior, response))
        texts.append(response)
        if config.stop_on_boxed:
            try:
                answer = extract_boxed(response)
            except MalformedAnswer:
                answer = None
            if answer is not None:
                return SyntheticTrace(question, tuple(steps), "boxed", answer, config.seed)
    return SyntheticTrace(question, tuple(steps), "max_steps", None, config.seed)


def synthesize_many(
    questions: Sequence[str],
    config: SynthesisConfig,
    client: Generator,
    max_workers: int = 1,
) -> list[SyntheticTrace]:
    """One trace per question, each with its own seed derived from ``config.seed``.

    Output order follows the input regardless of completion order.
    """
    def one(k: int) -> SyntheticTrace:
        cfg = replace(config, seed=derive_seed(config.seed, "synth", k))
        return synthesize(questions[k], cfg, client)

    if max_workers <= 1:
        return [one(k) for k in range(len(questions))]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(one, range(len(questions))))


@dataclass(frozen=True)
class ShiftReport:
    tv: float
    pearson: float

    def to_json(self) -> dict:
        return {"tv": self.tv, "pearson": self.pearson}


def distribution_shift(pi_a, pi_b, P_a, P_b) -> ShiftReport:
    """Total variation between marginals and Pearson between transition matrices."""
    a = np.asarray(pi_a, dtype=float)
    b = np.asarray(pi_b, dtype=float)
    for v in (a, b):
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
            raise BadConfig("marginals must be probability vectors")
    if a.shape != b.shape:
        raise BadConfig("marginals differ in length")
    return ShiftReport(total_variation(a, b), pearson(P_a, P_b))
