import json

import pytest
from hypothesis import given, strategies as st

from cotmol.errors import DuplicateId, MalformedAnswer, ParseError, ShapeError
from cotmol.trace import (
    BehaviorLabel,
    LabeledTrace,
    Trace,
    extract_boxed,
    read_corpus,
    read_labeled,
    segment,
    trace_to_record,
    write_corpus,
)


def _scan_split(text, delim):
    """Character-scan reference splitter."""
    pieces, cur, i = [], "", 0
    while i < len(text):
        if text.startswith(delim, i):
            pieces.append(cur)
            cur = ""
            i += len(delim)
        else:
            cur += text[i]
            i += 1
    pieces.append(cur)
    return [p.strip() for p in pieces if p.strip()]


def test_segment_paragraphs():
    steps = segment("First part.\n\nSecond part.")
    assert [s.text for s in steps] == ["First part.", "Second part."]
    assert [s.index for s in steps] == [0, 1]


def test_segment_single():
    assert [s.text for s in segment("single step")] == ["single step"]


def test_segment_sentences_against_scan():
    text = "A. B. C"
    assert [s.text for s in segment(text, [". "])] == ["A", "B", "C"] == _scan_split(text, ". ")


def test_segment_priority_prefers_first_delimiter():
    text = "one. two\n\nthree"
    assert [s.text for s in segment(text)] == ["one. two", "three"]


def test_segment_merges_punctuation_fragment():
    steps = segment("Real step.\n\n.\n\nAnother step.")
    assert len(steps) == 2
    assert steps[0].text.startswith("Real step.")


@given(st.lists(st.text(alphabet="abcxyz ", min_size=1, max_size=12), min_size=1, max_size=6))
def test_segment_matches_scan_for_word_pieces(words):
    text = "\n\n".join(words)
    expected = _scan_split(text, "\n\n")
    if not expected:
        return
    got = [s.text for s in segment(text, ["\n\n"])]
    assert got == expected


def _stack_boxed(text):
    """Stack-based oracle: contents of the last \\boxed{...}."""
    key = "\\boxed{"
    start = text.rfind(key)
    if start < 0:
        return None
    i = start + len(key)
    depth, buf = 1, []
    while i < len(text):
        ch = text[i]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return "".join(buf)
        buf.append(ch)
        i += 1
    raise ValueError("unbalanced")


@pytest.mark.parametrize("text,expected", [
    ("…so \\boxed{42}.", "42"),
    ("no box here", None),
    ("\\boxed{\\frac{1}{2}}", "\\frac{1}{2}"),
    ("first \\boxed{1} then \\boxed{x^{2}}", "x^{2}"),
])
def test_extract_boxed(text, expected):
    assert extract_boxed(text) == expected
    assert _stack_boxed(text) == expected


def test_extract_boxed_unbalanced():
    with pytest.raises(MalformedAnswer):
        extract_boxed("\\boxed{\\frac{1}{2}")


@given(st.recursive(st.text(alphabet="ab1+", max_size=4),
                    lambda inner: st.builds(lambda a, b: a + "{" + b + "}", inner, inner),
                    max_leaves=6))
def test_extract_boxed_matches_stack_oracle(body):
    text = "answer: \\boxed{" + body + "} done"
    assert extract_boxed(text) == _stack_boxed(text) == body


def test_corpus_round_trip(tmp_path):
    lt = LabeledTrace(Trace.from_texts("t1", "what?", ["a", "b", "c"], "7"),
                      (BehaviorLabel.DEEP, BehaviorLabel.REFLECT))
    path = tmp_path / "c.jsonl"
    write_corpus([lt], path)
    back = read_labeled(path)
    assert back == [lt]
    assert trace_to_record(back[0]) == trace_to_record(lt)


def test_read_corpus_text_records_are_segmented(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text(json.dumps({"id": "x", "query": "q", "text": "one\n\ntwo"}) + "\n")
    (item,) = read_corpus(path)
    assert item.texts == ["one", "two"]


def test_parse_error_line(tmp_path):
    path = tmp_path / "c.jsonl"
    good = json.dumps({"id": "a", "steps": ["x"]})
    path.write_text(f"{good}\n{json.dumps({'id': 'b', 'steps': ['y']})}\nnot json\n")
    with pytest.raises(ParseError) as exc:
        read_corpus(path)
    assert exc.value.line == 3


def test_duplicate_id(tmp_path):
    path = tmp_path / "c.jsonl"
    rec = json.dumps({"id": "t1", "steps": ["x"]})
    path.write_text(rec + "\n" + rec + "\n")
    with pytest.raises(DuplicateId):
        read_corpus(path)


def test_label_count_mismatch():
    with pytest.raises(ShapeError):
        LabeledTrace(Trace.from_texts("t", "q", ["a", "b"]), ())


@pytest.mark.parametrize("raw,label", [
    ("deep reasoning", BehaviorLabel.DEEP), ("D", BehaviorLabel.DEEP),
    ("self-reflection", BehaviorLabel.REFLECT), ("Exploration", BehaviorLabel.EXPLORE),
    ("normal operation", BehaviorLabel.NORMAL), ("explore", BehaviorLabel.EXPLORE),
])
def test_label_parse(raw, label):
    assert BehaviorLabel.parse(raw) is label
