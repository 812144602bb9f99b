import json

import numpy as np
import pytest
from scipy.stats import chisquare

from cotmol.annotate import annotate_trace
from cotmol.bondgraph import TransitionMatrix, estimate, pearson, stationary
from cotmol.errors import BadConfig, ClientExhausted, DegenerateCorrelation, InvalidTrace
from cotmol.synth import (
    SynthesisConfig,
    SyntheticTrace,
    apply_keyword_plan,
    build_plan,
    distribution_shift,
    load_table,
    render_behavior_prompt,
    sample_walk,
    summarization_prompt,
    synthesize,
    synthesize_many,
)
from cotmol.trace import BEHAVIORS, BehaviorLabel as B, Trace

from conftest import P_TRUE

ORDER = "NDRE"


def _tm(rows):
    return TransitionMatrix.from_probabilities(np.asarray(rows, float))


def _cycle():
    p = np.zeros((4, 4))
    p[ORDER.index("E"), ORDER.index("D")] = 1
    p[ORDER.index("D"), ORDER.index("R")] = 1
    p[ORDER.index("R"), ORDER.index("E")] = 1
    p[ORDER.index("N"), ORDER.index("N")] = 1
    return _tm(p)


def test_walk_absorbing():
    p = np.full((4, 4), 0.25)
    p[3] = [0, 0, 0, 1]
    walk = sample_walk(SynthesisConfig(_tm(p), max_steps=5))
    assert walk == [B.EXPLORE] * 5


def test_walk_cycle():
    assert sample_walk(SynthesisConfig(_cycle(), max_steps=4)) == [B.EXPLORE, B.DEEP, B.REFLECT, B.EXPLORE]


def test_walk_uniform_chi_square():
    walk = sample_walk(SynthesisConfig(_tm(np.full((4, 4), 0.25)), max_steps=10_000, seed=5))
    counts = np.array([walk.count(b) for b in BEHAVIORS])
    assert 0.5 * np.abs(counts / counts.sum() - 0.25).sum() < 0.02
    assert chisquare(counts).pvalue > 0.01


def test_walk_deterministic_per_seed():
    cfg = SynthesisConfig(_tm(P_TRUE), max_steps=200, seed=11)
    assert sample_walk(cfg) == sample_walk(cfg)


def test_config_validation():
    with pytest.raises(BadConfig):
        SynthesisConfig(_tm(P_TRUE), max_steps=0)
    tm = _tm(P_TRUE)
    object.__setattr__(tm, "p", tm.p * 1.01)
    with pytest.raises(BadConfig):
        SynthesisConfig(tm)


def test_behavior_prompts():
    p = render_behavior_prompt(B.REFLECT, "q?", "so far")
    assert "Please reflect on the response and provide a self-reflection." in p
    assert "You should conduct self-reflection behavior now." in p
    assert "\\boxed{}" in p
    assert "q?" in p and "so far" in p
    assert "Please further deepen the reasoning on the response." in render_behavior_prompt(B.DEEP, "q", "r")
    assert "(none yet)" in render_behavior_prompt(B.EXPLORE, "q", "")
    for b in BEHAVIORS:
        text = render_behavior_prompt(b, "q", "r")
        for name in ("Normal Operation", "Deep Reasoning", "Self-Reflection", "Exploration"):
            assert name.lower() in text.lower()


class Scripted:
    def __init__(self, responses, fail_at=None):
        self.responses = list(responses)
        self.fail_at = fail_at
        self.prompts = []

    def __call__(self, prompt):
        self.prompts.append(prompt)
        k = len(self.prompts)
        if self.fail_at == k:
            raise ClientExhausted(3)
        return self.responses[min(k - 1, len(self.responses) - 1)]


def test_synthesize_stops_at_box():
    client = Scripted(["think", "more", "so \\boxed{7}", "never"])
    tr = synthesize("q", SynthesisConfig(_tm(P_TRUE), max_steps=10), client)
    assert len(tr.steps) == 3 and tr.final_answer == "7" and tr.terminated_by == "boxed"
    assert "think\n\nmore" in client.prompts[2]


def test_synthesize_cap_and_failure():
    tr = synthesize("q", SynthesisConfig(_tm(P_TRUE), max_steps=4), Scripted(["x"]))
    assert len(tr.steps) == 4 and tr.terminated_by == "max_steps" and tr.final_answer is None
    tr = synthesize("q", SynthesisConfig(_tm(P_TRUE), max_steps=4), Scripted(["x"], fail_at=2))
    assert len(tr.steps) == 1 and tr.terminated_by == "client_failure"


def test_synthesize_reproducible_and_json():
    cfg = SynthesisConfig(_tm(P_TRUE), max_steps=6, seed=4)
    a = synthesize("q", cfg, lambda p: f"len {len(p)}")
    b = synthesize("q", cfg, lambda p: f"len {len(p)}")
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())
    rec = a.to_json()
    assert list(rec) == ["question", "steps", "terminated_by", "seed"]
    assert SyntheticTrace.from_json(rec) == a
    assert [s["behavior"] for s in rec["steps"]][0] == "exploration"


def test_rationale_window():
    client = Scripted(["s1", "s2", "s3"])
    synthesize("q", SynthesisConfig(_tm(P_TRUE), max_steps=3, rationale_window=1), client)
    assert "s1" not in client.prompts[2] and "s2" in client.prompts[2]


def test_synthesize_many_order_and_seeds():
    cfg = SynthesisConfig(_tm(P_TRUE), max_steps=5, seed=1)
    qs = [f"q{i}" for i in range(6)]
    serial = synthesize_many(qs, cfg, lambda p: "x")
    parallel = synthesize_many(qs, cfg, lambda p: "x", max_workers=3)
    assert serial == parallel
    assert [t.question for t in serial] == qs
    assert len({t.seed for t in serial}) == 6


def test_echo_round_trip():
    cfg = SynthesisConfig(_tm(P_TRUE), max_steps=251, stop_on_boxed=False, seed=2)
    traces = synthesize_many([f"q{i}" for i in range(20)], cfg, lambda p: "step")
    labeled = []
    for k, st in enumerate(traces):
        walk = st.behaviors
        # echo classifier: the label of edge t is the walk behavior of step t+1
        echo = iter(walk[1:])
        labeled.append(annotate_trace(st.to_trace(f"t{k}"), lambda prev, cur: next(echo)))
        assert labeled[-1] == st.to_labeled(f"t{k}")
    tm, _ = estimate(labeled)
    assert pearson(tm, P_TRUE) >= 0.99


# ---------------------------------------------------------------- keyword plans

def test_keyword_examples():
    p1, p2, rm = build_plan("plan1"), build_plan("plan2"), build_plan("removal")
    assert p1.apply("wait, that is wrong") == "hold on, that is wrong"
    assert p2.apply("therefore x=2") == "hence x=2"
    assert p1.apply("Therefore x=2") == "Thus x=2"
    assert p1.apply("nothing to see") == "nothing to see"
    assert rm.apply("nothing to see") == "nothing to see"


def test_keyword_word_boundaries():
    p1 = build_plan("plan1")
    assert "so" in p1.table
    assert p1.apply("also") == "also"
    assert p1.apply("so-called") == "so-called"
    assert p1.apply("isotope") == "isotope"


def test_plan_tables_disjoint():
    for e in load_table():
        assert e.plan1 != e.plan2
    assert all(v is None for v in build_plan("removal").table.values())
    with pytest.raises(BadConfig):
        build_plan("plan3")


def test_removal_idempotent_and_structure():
    rm = build_plan("removal")
    texts = [f"{e.keyword} the value is {k}" for k, e in enumerate(load_table())]
    trace = Trace.from_texts("t", "q", texts + ["plain step"])
    once = apply_keyword_plan(trace, rm)
    twice = apply_keyword_plan(once, rm)
    assert once == twice
    assert len(once.steps) == len(trace.steps)
    assert once.steps[-1].text == "plain step"


def test_plan_preserves_labels():
    from conftest import labeled_from_codes

    lt = labeled_from_codes("t", "DR")
    out = apply_keyword_plan(lt, build_plan("plan2"))
    assert out.edge_labels == lt.edge_labels


# ---------------------------------------------------------------- summarization and shift

def test_summarization_prompt():
    trace = Trace.from_texts("t", "q", ["first", "second"])
    p = summarization_prompt(trace)
    assert "Input Long Chain-of-Thought Trace:\n\nfirst\n\nsecond\n\nSummary:" in p
    assert "compress this reasoning process" in p


def test_distribution_shift():
    rep = distribution_shift([0.25] * 4, [0.25] * 4, P_TRUE, P_TRUE)
    assert rep.tv == 0.0 and rep.pearson == pytest.approx(1.0)
    rep = distribution_shift([0.25] * 4, [0.55, 0.15, 0.15, 0.15], P_TRUE, P_TRUE)
    assert rep.tv == pytest.approx(0.30)
    with pytest.raises(DegenerateCorrelation):
        distribution_shift([0.25] * 4, [0.25] * 4, P_TRUE, np.full((4, 4), 0.25))
