import numpy as np
import pytest
from hypothesis import settings

# property tests are about correctness, not speed; cold caches and loaded CI boxes trip deadlines
settings.register_profile("cotmol", deadline=None)
settings.load_profile("cotmol")

from cotmol.bondgraph import simulate_labels
from cotmol.trace import BEHAVIORS, BehaviorLabel, LabeledTrace, Trace

# a generic ergodic, aperiodic chain over N, D, R, E
P_TRUE = np.array([
    [0.40, 0.30, 0.10, 0.20],
    [0.15, 0.50, 0.20, 0.15],
    [0.10, 0.35, 0.30, 0.25],
    [0.25, 0.20, 0.15, 0.40],
])


@pytest.fixture
def p_true():
    return P_TRUE.copy()


def labeled_from_codes(trace_id, codes, query="q"):
    labels = tuple(BehaviorLabel.parse(c) for c in codes)
    steps = [f"step {k} of {trace_id}" for k in range(len(labels) + 1)]
    return LabeledTrace(Trace.from_texts(trace_id, query, steps), labels)


def chain_corpus(P, n_traces, edges_per_trace, seed):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_traces):
        states = simulate_labels(P, edges_per_trace, rng)
        out.append([BEHAVIORS[s] for s in states])
    return out


# ---------------------------------------------------------------- acceptance reporting

_ACCEPTANCE: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        detail = dict(item.user_properties).get("detail", "")
        _ACCEPTANCE[number] = (title, rep.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[number]
        line = f"[{'PASS' if ok else 'FAIL'}] {number:2d}. {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
