"""Prompt templates for behavior-directed generation and trace summarization."""

from __future__ import annotations

from ..annotate import BEHAVIOR_DEFINITIONS
from ..errors import InvalidTrace
from ..trace import BehaviorLabel, LabeledTrace, Trace

NO_RATIONALE = "(none yet)"

# (instruction completing "Otherwise, please ...", behavior name in the directive)
_DIRECTIVES = {
    BehaviorLabel.REFLECT: ("reflect on the response and provide a self-reflection", "self-reflection"),
    BehaviorLabel.EXPLORE: ("explore a novel reasoning path in the response", "exploration"),
    BehaviorLabel.NORMAL: ("conduct normal operation on the response", "normal operation"),
    BehaviorLabel.DEEP: ("further deepen the reasoning on the response", "deep reasoning"),
}

BEHAVIOR_TEMPLATE = """\
Assume that you are a helpful assistant. You will receive a question and a previously reasoned rationale. If you can directly get the answer, please output the concise answer with \\boxed{{}}. Otherwise, please {instruction}.

Here are some reasoning behavior definitions:
{definitions}

You should conduct {name} behavior now.

Please {instruction}.

Question:
{question}

Rationale:
{rationale}"""


def render_behavior_prompt(behavior: BehaviorLabel, question: str, rationale: str) -> str:
    instruction, name = _DIRECTIVES[BehaviorLabel.parse(behavior)]
    return BEHAVIOR_TEMPLATE.format(
        instruction=instruction,
        definitions=BEHAVIOR_DEFINITIONS,
        name=name,
        question=question,
        rationale=rationale if rationale.strip() else NO_RATIONALE,
    )


SUMMARY_TEMPLATE = """\
You are an expert summarizer. Below is a Long Chain-of-Thought reasoning trace generated by an AI model to solve a complex problem. Your task is to compress this reasoning process into a concise summary.

Input Long Chain-of-Thought Trace:

{trace}

Summary:"""


def summarization_prompt(item: Trace | LabeledTrace, joiner: str = "\n\n") -> str:
    trace = item.trace if isinstance(item, LabeledTrace) else item
    body = joiner.join(trace.texts)
    if not body.strip():
        raise InvalidTrace(f"trace {trace.id!r} is empty")
    return SUMMARY_TEMPLATE.format(trace=body)
