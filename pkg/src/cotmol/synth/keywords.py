"""Lexical keyword replacement and removal plans for bond-marker words."""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from importlib import resources

from ..errors import BadConfig
from ..trace import LabeledTrace, Step, Trace

TABLE_VERSION = "v1"
PLANS = ("plan1", "plan2", "removal")

# apostrophes and hyphens count as word characters at keyword boundaries
_WORD = r"[\w'’-]"


@dataclass(frozen=True)
class KeywordEntry:
    category: str
    keyword: str
    plan1: str
    plan2: str


@dataclass(frozen=True)
class KeywordPlan:
    plan_id: str
    table: dict[str, str | None]          # keyword -> replacement, None deletes
    categories: dict[str, str]             # keyword -> bond category

    def __post_init__(self) -> None:
        if self.plan_id not in PLANS:
            raise BadConfig(f"unknown keyword plan {self.plan_id!r}")
        keys = sorted(self.table, key=len, reverse=True)
        alternation = "|".join(_keyword_pattern(k) for k in keys)
        object.__setattr__(
            self, "_regex",
            re.compile(rf"(?<!{_WORD})(?:{alternation})(?!{_WORD})", re.IGNORECASE),
        )
        object.__setattr__(self, "_lookup", {_fold(k): k for k in keys})

    def apply(self, text: str) -> str:
        if self.plan_id == "removal":
            # deletions can splice a new keyword together; run to a fixed point
            while self._regex.search(text):
                text = _tidy(self._regex.sub("", text))
            return text
        return self._regex.sub(self._replace, text)

    def find(self, text: str) -> list[str]:
        return [m.group(0) for m in self._regex.finditer(text)]

    def _replace(self, m: re.Match) -> str:
        found = m.group(0)
        repl = self.table[self._lookup[_fold(found)]]
        assert repl is not None
        if found[0].isupper() and repl[:1].islower():
            repl = repl[0].upper() + repl[1:]
        return repl


def _fold(s: str) -> str:
    return re.sub(r"\s+", " ", s.replace("’", "'")).lower()


def _keyword_pattern(keyword: str) -> str:
    parts = []
    for ch in keyword:
        if ch in "'’":
            parts.append("['’]")
        elif ch == " ":
            parts.append(r"\s+")
        else:
            parts.append(re.escape(ch))
    return "".join(parts)


def _tidy(text: str) -> str:
    text = re.sub(r"[ \t]{2,}", " ", text)
    text = re.sub(r"[ \t]+\n", "\n", text)
    text = re.sub(r"\n[ \t]+", "\n", text)
    return text.strip()


def load_table(path: str | None = None) -> list[KeywordEntry]:
    """Rows of a keyword TSV; the bundled table when ``path`` is None."""
    if path is None:
        raw = resources.files("cotmol").joinpath(f"data/keywords_{TABLE_VERSION}.tsv").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    lines = [ln for ln in raw.splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(io.StringIO("\n".join(lines)), delimiter="\t", quoting=csv.QUOTE_NONE)
    entries = []
    for row in reader:
        try:
            entries.append(KeywordEntry(row["category"], row["keyword"], row["plan1"], row["plan2"]))
        except KeyError as exc:
            raise BadConfig(f"keyword table missing column {exc}") from None
    return entries


def build_plan(plan_id: str, entries: list[KeywordEntry] | None = None) -> KeywordPlan:
    entries = load_table() if entries is None else entries
    if plan_id == "removal":
        table: dict[str, str | None] = {e.keyword: None for e in entries}
    elif plan_id in ("plan1", "plan2"):
        table = {e.keyword: getattr(e, plan_id) for e in entries}
    else:
        raise BadConfig(f"unknown keyword plan {plan_id!r}")
    return KeywordPlan(plan_id, table, {e.keyword: e.category for e in entries})


def apply_keyword_plan(item: Trace | LabeledTrace, plan: KeywordPlan) -> Trace | LabeledTrace:
    """Rewrite every step; the step count and any labels are kept.

    A step that removal would empty entirely keeps its original text.
    """
    trace = item.trace if isinstance(item, LabeledTrace) else item
    steps = []
    for step in trace.steps:
        new = plan.apply(step.text)
        steps.append(Step(step.index, new if new.strip() else step.text))
    rewritten = Trace(trace.id, trace.query, tuple(steps), trace.final_answer)
    if isinstance(item, LabeledTrace):
        return LabeledTrace(rewritten, item.edge_labels)
    return rewritten
