"""Edge labeling through an LLM annotator and agreement scoring."""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import AnnotationFailed, CotmolError, InvalidTrace, ShapeError, UnparsableVerdict
from .trace import BEHAVIORS, BehaviorLabel, LabeledTrace, Trace

logger = logging.getLogger(__name__)

# (previous step text, current step text) -> label
Classifier = Callable[[str, str], BehaviorLabel]

START_PLACEHOLDER = "(start of trace)"

BEHAVIOR_DEFINITIONS = """\
- normal operation — Straightforward, direct operations (e.g., arithmetic, factual recall, simple step-by-step logic) without introducing new logical nodes.
- deep reasoning — Multi-step causal, deductive, or analogical thinking that extends the reasoning chain by introducing new logical nodes or hidden assumptions.
- self-reflection — commenting on its own thought process (e.g., confidence, strategy, uncertainty, mistakes, or reconsideration of earlier reasoning) and tracing back to previous logical nodes.
- exploration — generating new possibilities, hypotheses, or questions, branching into alternative paths rather than following a single conclusion."""

ANNOTATION_TEMPLATE = """\
You are an expert annotator. Classify the CURRENT STEP into exactly one of the following categories of reasoning/behavior:
{definitions}

Decision rules:
(1) If multiple categories seem to overlap, choose the most specific match based on intent:
    - If the text is about reasoning itself → self-reflection.
    - If the text is branching or speculating → exploration.
    - If the text is extending the reasoning chain with deeper causality or hidden steps → deep reasoning.
    - Otherwise, if it's just direct calculation or straightforward logic → normal operation.
(2) Do not label based on correctness of the reasoning — only on the behavioral style of thinking.
(3) Ignore surface complexity (e.g., long math steps may still be normal operation if they are straightforward).
(4) If mixed, choose the dominant intent; break ties with this priority: self-reflection > exploration > deep reasoning > normal operation.

Output format (strict):

Return exactly one line and nothing else:

### Behavior: {{normal operation | deep reasoning | self-reflection | exploration}}

PREVIOUS STEP:

{prev}

CURRENT STEP:

{cur}"""


def build_annotation_prompt(prev_step: str, cur_step: str) -> str:
    if not cur_step.strip():
        raise InvalidTrace("current step must be non-empty")
    prev = prev_step if prev_step.strip() else START_PLACEHOLDER
    return ANNOTATION_TEMPLATE.format(definitions=BEHAVIOR_DEFINITIONS, prev=prev, cur=cur_step)


_VERDICT = re.compile(r"^\s*###\s*behavior\s*:(.*)$", re.IGNORECASE)


def render_verdict(label: BehaviorLabel) -> str:
    return f"### Behavior: {label.value}"


def parse_verdict(response: str) -> BehaviorLabel:
    """Label from the first ``### Behavior:`` line of a model response."""
    for line in response.splitlines():
        m = _VERDICT.match(line.replace("**", ""))
        if m is None:
            continue
        value = m.group(1).strip().lower()
        for label in BehaviorLabel:
            if value == label.value:
                return label
        raise UnparsableVerdict(response)
    raise UnparsableVerdict(response)


@dataclass(frozen=True)
class AnnotationVerdict:
    label: BehaviorLabel
    raw_response: str


def llm_classifier(client: Callable[[str], str]) -> Classifier:
    """Wrap a text-generation capability as an edge classifier."""

    def classify(prev: str, cur: str) -> BehaviorLabel:
        raw = client(build_annotation_prompt(prev, cur))
        return AnnotationVerdict(parse_verdict(raw), raw).label

    return classify


def annotate_trace(trace: Trace, classifier: Classifier, max_workers: int = 1) -> LabeledTrace:
    """Label every edge ``step[t] -> step[t+1]`` of a trace.

    Edges are independent and may be classified concurrently; the result is
    assembled in edge order regardless of completion order.
    """
    if len(trace.steps) < 2:
        raise InvalidTrace(f"trace {trace.id!r} needs at least 2 steps to have edges")
    texts = trace.texts
    n_edges = len(texts) - 1

    def label_edge(t: int) -> BehaviorLabel:
        try:
            return classifier(texts[t], texts[t + 1])
        except CotmolError as exc:
            raise AnnotationFailed(t, exc) from exc

    if max_workers <= 1:
        labels = [label_edge(t) for t in range(n_edges)]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            labels = list(pool.map(label_edge, range(n_edges)))
    return LabeledTrace(trace, tuple(labels))


@dataclass(frozen=True)
class AgreementReport:
    per_class_f1: dict[BehaviorLabel, float]
    macro_f1: float
    confusion: np.ndarray  # rows gold, columns predicted, in BEHAVIORS order


def macro_f1(pred: Sequence[BehaviorLabel], gold: Sequence[BehaviorLabel]) -> AgreementReport:
    if len(pred) != len(gold):
        raise ShapeError(f"pred has {len(pred)} labels, gold has {len(gold)}")
    if not gold:
        raise ShapeError("need at least one label")
    index = {b: i for i, b in enumerate(BEHAVIORS)}
    confusion = np.zeros((4, 4), dtype=np.int64)
    for p, g in zip(pred, gold):
        confusion[index[g], index[p]] += 1

    per_class: dict[BehaviorLabel, float] = {}
    for b, i in index.items():
        if confusion[i, :].sum() == 0:
            continue
        tp = confusion[i, i]
        predicted = confusion[:, i].sum()
        precision = tp / predicted if predicted else 0.0
        recall = tp / confusion[i, :].sum()
        denom = precision + recall
        per_class[b] = float(2 * precision * recall / denom) if denom else 0.0
    macro = sum(per_class.values()) / len(per_class)
    return AgreementReport(per_class, float(macro), confusion)
