"""Trace data model, step segmentation, boxed-answer extraction and JSONL I/O."""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import DuplicateId, InvalidTrace, MalformedAnswer, ParseError, ShapeError

DEFAULT_DELIMITERS: tuple[str, ...] = ("\n\n", "\n", ". ")


class BehaviorLabel(enum.Enum):
    """Bond type of an edge between two consecutive reasoning steps."""

    NORMAL = "normal operation"
    DEEP = "deep reasoning"
    REFLECT = "self-reflection"
    EXPLORE = "exploration"

    @property
    def code(self) -> str:
        return _CODES[self]

    @classmethod
    def parse(cls, value: "str | BehaviorLabel") -> "BehaviorLabel":
        """Accept a canonical string, a one-letter code, or an enum name."""
        if isinstance(value, BehaviorLabel):
            return value
        key = value.strip().lower()
        try:
            return _LOOKUP[key]
        except KeyError:
            raise ValueError(f"unknown behavior label {value!r}") from None


_CODES = {
    BehaviorLabel.NORMAL: "N",
    BehaviorLabel.DEEP: "D",
    BehaviorLabel.REFLECT: "R",
    BehaviorLabel.EXPLORE: "E",
}

# Row/column order of every 4x4 matrix in the package.
BEHAVIORS: tuple[BehaviorLabel, ...] = tuple(_CODES)
BEHAVIOR_CODES: tuple[str, ...] = tuple(_CODES.values())

_LOOKUP: dict[str, BehaviorLabel] = {}
for _b in BehaviorLabel:
    _LOOKUP[_b.value] = _b
    _LOOKUP[_b.code.lower()] = _b
    _LOOKUP[_b.name.lower()] = _b
_LOOKUP.update({"reflection": BehaviorLabel.REFLECT, "self-exploration": BehaviorLabel.EXPLORE})


@dataclass(frozen=True)
class Step:
    index: int
    text: str


@dataclass(frozen=True)
class Trace:
    id: str
    query: str
    steps: tuple[Step, ...]
    final_answer: str | None = None

    def __post_init__(self) -> None:
        if not self.steps:
            raise InvalidTrace(f"trace {self.id!r} has no steps")
        for i, step in enumerate(self.steps):
            if step.index != i:
                raise InvalidTrace(f"trace {self.id!r}: step indices must run 0..T-1")

    @classmethod
    def from_texts(
        cls, id: str, query: str, texts: Sequence[str], final_answer: str | None = None
    ) -> "Trace":
        return cls(id, query, tuple(Step(i, t) for i, t in enumerate(texts)), final_answer)

    @property
    def texts(self) -> list[str]:
        return [s.text for s in self.steps]

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class LabeledTrace:
    trace: Trace
    edge_labels: tuple[BehaviorLabel, ...] = field(default=())

    def __post_init__(self) -> None:
        if len(self.edge_labels) != len(self.trace.steps) - 1:
            raise ShapeError(
                f"trace {self.trace.id!r}: expected {len(self.trace.steps) - 1} edge labels, "
                f"got {len(self.edge_labels)}"
            )

    @property
    def id(self) -> str:
        return self.trace.id


# --------------------------------------------------------------------------- #
# segmentation

def _substantive(fragment: str) -> bool:
    # pure-punctuation crumbs such as "." or "-" are not steps of their own
    core = "".join(fragment.split())
    return len(core) >= 2 or any(ch.isalnum() for ch in core)


def segment(text: str, delimiters: Sequence[str] = DEFAULT_DELIMITERS) -> list[Step]:
    """Split ``text`` into steps.

    Delimiters are tried in order; the first one that yields at least two
    non-empty pieces is used, and the delimiter itself is dropped. Fragments
    without substantive content are folded into the preceding step.
    """
    if not text or not text.strip():
        raise InvalidTrace("cannot segment empty text")
    if not delimiters:
        raise InvalidTrace("at least one delimiter is required")

    pieces = [text.strip()]
    for delim in delimiters:
        if not delim:
            continue
        parts = [p.strip() for p in text.split(delim)]
        parts = [p for p in parts if p]
        if len(parts) >= 2:
            pieces = parts
            break

    merged: list[str] = []
    for piece in pieces:
        if merged and not _substantive(piece):
            merged[-1] = f"{merged[-1]} {piece}"
        else:
            merged.append(piece)
    if len(merged) >= 2 and not _substantive(merged[0]):
        merged[1] = f"{merged[0]} {merged[1]}"
        del merged[0]
    return [Step(i, s) for i, s in enumerate(merged)]


# --------------------------------------------------------------------------- #
# boxed answers

_BOX = "\\boxed{"


def extract_boxed(text: str) -> str | None:
    """Content of the last top-level ``\\boxed{...}`` in ``text``.

    Braces are matched with a depth counter, so nested groups such as
    ``\\boxed{\\frac{1}{2}}`` come back whole. Raises MalformedAnswer when a
    box is opened but never closed.
    """
    answer = None
    pos = text.find(_BOX)
    while pos != -1:
        start = pos + len(_BOX)
        depth = 1
        i = start
        while i < len(text):
            ch = text[i]
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    break
            i += 1
        if depth != 0:
            raise MalformedAnswer(f"unbalanced braces after \\boxed{{ at offset {pos}")
        answer = text[start:i]
        pos = text.find(_BOX, i + 1)
    return answer


# --------------------------------------------------------------------------- #
# corpus I/O

def trace_from_record(
    record: dict, delimiters: Sequence[str] = DEFAULT_DELIMITERS
) -> Trace | LabeledTrace:
    if not isinstance(record, dict):
        raise InvalidTrace("trace record must be a JSON object")
    try:
        trace_id = str(record["id"])
    except KeyError:
        raise InvalidTrace("trace record lacks an 'id'") from None
    query = str(record.get("query", ""))
    if "steps" in record:
        texts = [str(s).strip() for s in record["steps"]]
        if not texts or not all(texts):
            raise InvalidTrace(f"trace {trace_id!r}: steps must be non-empty strings")
        trace = Trace.from_texts(trace_id, query, texts, record.get("final_answer"))
    elif "text" in record:
        steps = segment(str(record["text"]), delimiters)
        trace = Trace(trace_id, query, tuple(steps), record.get("final_answer"))
    else:
        raise InvalidTrace(f"trace {trace_id!r} has neither 'steps' nor 'text'")

    labels = record.get("labels")
    if labels is None:
        return trace
    try:
        parsed = tuple(BehaviorLabel.parse(lb) for lb in labels)
    except ValueError as exc:
        raise InvalidTrace(f"trace {trace_id!r}: {exc}") from None
    return LabeledTrace(trace, parsed)


def trace_to_record(item: Trace | LabeledTrace) -> dict:
    trace = item.trace if isinstance(item, LabeledTrace) else item
    record: dict = {"id": trace.id, "query": trace.query, "steps": trace.texts}
    if trace.final_answer is not None:
        record["final_answer"] = trace.final_answer
    if isinstance(item, LabeledTrace):
        record["labels"] = [lb.value for lb in item.edge_labels]
    return record


def read_corpus(
    path: str | os.PathLike, delimiters: Sequence[str] = DEFAULT_DELIMITERS
) -> list[Trace | LabeledTrace]:
    """Load a JSONL corpus; records carrying ``labels`` come back labeled."""
    items: list[Trace | LabeledTrace] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(exc.msg, line=lineno) from None
            try:
                item = trace_from_record(record, delimiters)
            except (InvalidTrace, ShapeError) as exc:
                raise ParseError(str(exc), line=lineno) from None
            trace_id = item.id
            if trace_id in seen:
                raise DuplicateId(trace_id)
            seen.add(trace_id)
            items.append(item)
    return items


def read_labeled(path: str | os.PathLike) -> list[LabeledTrace]:
    items = read_corpus(path)
    unlabeled = [it.id for it in items if not isinstance(it, LabeledTrace)]
    if unlabeled:
        raise InvalidTrace(f"{len(unlabeled)} traces lack labels, e.g. {unlabeled[0]!r}")
    return items  # type: ignore[return-value]


def write_corpus(items: Iterable[Trace | LabeledTrace], path: str | os.PathLike) -> None:
    seen: set[str] = set()
    lines = []
    for item in items:
        if item.id in seen:
            raise DuplicateId(item.id)
        seen.add(item.id)
        lines.append(json.dumps(trace_to_record(item), ensure_ascii=False))
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")
