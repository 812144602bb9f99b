"""Exit criteria for the build, one test per criterion.

Each test records a short detail string; the session summary prints a
PASS/FAIL line per criterion.
"""

import hashlib
import itertools
import json
import math
import os
import socket
import time

import numpy as np
import pytest
from scipy.stats import chisquare

from cotmol.annotate import annotate_trace, build_annotation_prompt, macro_f1, render_verdict
from cotmol.bondgraph import TransitionMatrix, estimate, pearson, simulate_labels, stability_curve, stationary
from cotmol.cli import dispatch
from cotmol.energy import (
    PathGraph,
    RopeConfig,
    boltzmann_weights,
    enumerate_paths,
    ergodic_energy_sim,
    ordering_failure_rate,
    rope_mc,
    sample_bound,
    softmin_energy,
)
from cotmol.geometry import meb, tsne, volume_delta
from cotmol.llm import CallbackTransport, ClientConfig, LLMClient
from cotmol.synth import SynthesisConfig, apply_keyword_plan, build_plan, load_table, synthesize
from cotmol.trace import BEHAVIORS, BehaviorLabel as B, Trace, trace_to_record

from conftest import P_TRUE
from test_geometry import _brute_meb

# behavior-persistent ground truth: each behavior tends to continue itself
P_PERSIST = np.array([
    [0.84, 0.08, 0.03, 0.05],
    [0.04, 0.88, 0.05, 0.03],
    [0.03, 0.07, 0.85, 0.05],
    [0.05, 0.06, 0.03, 0.86],
])


def detail(request, text):
    request.node.user_properties.append(("detail", text))


def _codes(states):
    return [BEHAVIORS[s] for s in states]


def _recovery_trials(P, trials=100, edges=5000):
    ok = 0
    pi = stationary(P)
    for seed in range(trials):
        rng = np.random.default_rng(seed)
        states = simulate_labels(P, edges, rng, start=int(rng.choice(4, p=pi)))
        tm, _ = estimate([_codes(states)])
        ok += pearson(tm, P) >= 0.99 and np.abs(tm.p - P).max() <= 0.03
    return ok


@pytest.mark.acceptance(1, "transition recovery at 5,000 edges")
def test_ac01_transition_recovery(request):
    t0 = time.perf_counter()
    ok = _recovery_trials(P_PERSIST)
    elapsed = time.perf_counter() - t0
    generic = _recovery_trials(P_TRUE, trials=20)
    detail(request, f"{ok}/100 trials, {elapsed:.2f}s; generic mixing P passes {generic}/20 (binomial noise)")
    assert ok >= 95 and elapsed < 5.0


@pytest.mark.acceptance(2, "stability curve shape")
def test_ac02_stability_curve(request):
    rng = np.random.default_rng(2024)
    pi = stationary(P_TRUE)
    # 10,000 traces of 2 edge labels each: 20k edges, one transition per trace
    corpus = [_codes(simulate_labels(P_TRUE, 2, rng, start=int(rng.choice(4, p=pi)))) for _ in range(10_000)]
    curve = stability_curve(corpus, [500, 1000, 2000, 5000], trials=5, seed=7)
    means = [p.mean_pearson for p in curve.points]
    drops = [a - b for a, b in zip(means, means[1:]) if b < a]
    at2k = means[2]
    detail(request, "mean pearson " + ", ".join(f"{m:.4f}" for m in means))
    assert at2k >= 0.95
    assert len(drops) <= 1 and all(d <= 0.005 for d in drops)


@pytest.mark.acceptance(3, "rotary energy ordering Monte Carlo")
def test_ac03_rope_monte_carlo(request):
    t0 = time.perf_counter()
    good = 0
    for seed in range(100):
        res = rope_mc(RopeConfig(d_k=64, rho="geom:0.9,0.8", distances=(1, 4, 16), samples=100_000, seed=seed))
        good += res.ordering_holds and all(r.within_tolerance for r in res.per_distance)
    elapsed = time.perf_counter() - t0
    detail(request, f"{good}/100 seeds, {elapsed:.1f}s")
    assert good >= 99 and elapsed < 30.0


@pytest.mark.acceptance(4, "concentration lemma sample bound")
def test_ac04_concentration(request):
    n = sample_bound(1.0, 0.1, 0.05)
    # adjacent expected-logit gaps of exactly 2 epsilon, the tightest case the bound covers
    rate = ordering_failure_rate([0.4, 0.2, 0.0], 1.0, n, experiments=1000, seed=4)
    detail(request, f"N={n}, failure rate {rate:.4f}")
    assert n == 877 and rate <= 0.05


@pytest.mark.acceptance(5, "minimum enclosing ball oracle")
def test_ac05_meb(request):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(1000):
        dim = int(rng.integers(2, 4))
        n = int(rng.integers(1, 9))
        P = rng.normal(size=(n, dim))
        worst = max(worst, abs(meb(P).radius - _brute_meb(P)))
    covered = 0
    for k in range(200):
        n = int(rng.integers(1, 513))
        P = rng.normal(size=(n, int(rng.integers(2, 4)))) * rng.uniform(0.1, 10)
        ball = meb(P, seed=k)
        covered += bool(np.all(np.linalg.norm(P - ball.center, axis=1) <= ball.radius + 1e-9))
    detail(request, f"max radius gap {worst:.2e}; coverage {covered}/200")
    assert worst <= 1e-9 and covered == 200


@pytest.mark.acceptance(6, "volume-change arithmetic anchors")
def test_ac06_volume_anchors(request):
    red = volume_delta(35.2, 31.2, "reduction")
    exp = volume_delta(23.95, 29.22, "expansion")
    detail(request, f"reduction {red:.4f}%, expansion {exp:.4f}%")
    assert abs(red - 11.36) <= 0.01 and abs(exp - 22.00) <= 0.01


@pytest.mark.acceptance(7, "soft-min path aggregation")
def test_ac07_softmin(request):
    rng = np.random.default_rng(7)
    worst, graphs = 0.0, 0
    while graphs < 200:
        n = int(rng.integers(2, 12))
        edges = tuple((u, v, float(rng.normal(1.0, 1.0))) for u in range(n) for v in range(u + 1, n)
                      if rng.random() < 0.45)
        g = PathGraph(tuple(range(n)), edges)
        paths = enumerate_paths(g, 0, n - 1)
        if not paths:
            continue
        ref = -math.log(math.fsum(math.exp(-e) for _, e in paths))
        worst = max(worst, abs(softmin_energy(g, 0, n - 1) - ref))
        graphs += 1
    E = 3.7
    two = PathGraph(("s", "a", "b", "t"), (("s", "a", 1.2), ("a", "t", E - 1.2), ("s", "b", 0.3), ("b", "t", E - 0.3)))
    tie = abs(softmin_energy(two, "s", "t") - (E - math.log(2)))
    detail(request, f"max DP gap {worst:.2e} over 200 DAGs; equal-path error {tie:.1e}")
    assert worst <= 1e-9 and tie <= 1e-12


@pytest.mark.acceptance(8, "ergodic low-energy equilibrium")
def test_ac08_ergodic(request):
    mu, spread = [0.5, -1.0, -0.2, 0.8], [0.4, 0.3, 0.5, 0.6]
    T = 100_000
    good = 0
    for seed in range(100):
        res = ergodic_energy_sim(P_TRUE, mu, spread, T, seed=seed)
        good += res.gap <= 3 * res.sigma_eff / math.sqrt(T) and res.tv_to_stationary <= 0.01
    detail(request, f"{good}/100 seeds within 3 sigma_eff/sqrt(T) and TV 0.01")
    assert good >= 99


@pytest.mark.acceptance(9, "Boltzmann weight invariants")
def test_ac09_boltzmann(request):
    rng = np.random.default_rng(9)
    worst_sum = worst_shift = 0.0
    for _ in range(10_000):
        e = rng.normal(0, rng.uniform(0.1, 10), size=int(rng.integers(1, 33)))
        w = boltzmann_weights(e)
        worst_sum = max(worst_sum, abs(w.sum() - 1.0))
        worst_shift = max(worst_shift, np.abs(w - boltzmann_weights(e + rng.uniform(-100, 100))).max())
        order = np.argsort(e, kind="stable")
        assert np.all(np.diff(w[order]) <= 0)
    detail(request, f"sum error {worst_sum:.1e}, shift error {worst_shift:.1e}")
    assert worst_sum <= 1e-12 and worst_shift <= 1e-12


@pytest.mark.acceptance(10, "synthesis fidelity with a mock client")
def test_ac10_synthesis(request):
    tm = TransitionMatrix.from_probabilities(P_TRUE)
    pi = stationary(P_TRUE)
    walks = []
    for k in range(40):
        cfg = SynthesisConfig(tm, max_steps=250, stop_on_boxed=False, seed=1000 + k)
        walks.append(synthesize(f"q{k}", cfg, lambda prompt: "continuing"))
    behaviors = [b for w in walks for b in w.behaviors]
    counts = np.array([behaviors.count(b) for b in BEHAVIORS])
    tv = 0.5 * np.abs(counts / counts.sum() - pi).sum()
    p_value = chisquare(counts, pi * counts.sum()).pvalue

    labeled = []
    for k, w in enumerate(walks[:20]):
        echo = iter(w.behaviors[1:])
        labeled.append(annotate_trace(w.to_trace(f"s{k}"), lambda prev, cur: next(echo)))
    edges = sum(len(lt.edge_labels) for lt in labeled)
    r = pearson(estimate(labeled)[0], P_TRUE)
    detail(request, f"{counts.sum()} steps, TV {tv:.4f}, chi2 p {p_value:.3f}; round trip {edges} edges pearson {r:.4f}")
    assert counts.sum() == 10_000 and tv <= 0.02 and p_value > 0.01
    assert edges >= 4980 and r >= 0.99


@pytest.mark.acceptance(11, "keyword replacement plans")
def test_ac11_keywords(request):
    table = load_table()
    plan1, removal = build_plan("plan1"), build_plan("removal")
    steps = []
    for k, e in enumerate(table):
        steps.append(f"{e.keyword} marker {k}.")
        steps.append(f"{e.keyword[0].upper()}{e.keyword[1:]} marker {k}b.")
    trace = Trace.from_texts("kw", "q", steps)

    out = apply_keyword_plan(trace, plan1)
    residual = 0
    for k, e in enumerate(table):
        lower, upper = out.steps[2 * k].text, out.steps[2 * k + 1].text
        # replacement follows the case of the matched text's first letter
        first = e.plan1[0].upper() if e.keyword[0].isupper() else e.plan1[0]
        expected = f"{first}{e.plan1[1:]} marker {k}."
        cap = e.plan1[0].upper() + e.plan1[1:]
        residual += lower != expected or upper != f"{cap} marker {k}b."
    once = apply_keyword_plan(trace, removal)
    twice = apply_keyword_plan(once, removal)
    same = json.dumps(trace_to_record(once)).encode() == json.dumps(trace_to_record(twice)).encode()
    left = sum(len(removal.find(s.text)) for s in once.steps)
    detail(request, f"{len(table)} keywords seeded; residual originals {residual}; removal idempotent {same}")
    assert residual == 0 and len(out.steps) == len(trace.steps) == len(once.steps)
    assert same and left == 0


@pytest.mark.acceptance(12, "t-SNE sanity")
def test_ac12_tsne(request):
    decreases = 0
    for k in range(10):
        X = np.random.default_rng(100 + k).normal(size=(200, 32))
        res = tsne(X, iters=1000, seed=k)
        decreases += res.kl_final < res.kl_initial
    X = np.random.default_rng(0).normal(size=(200, 32))
    a, b = tsne(X, iters=300, seed=3), tsne(X, iters=300, seed=3)
    identical = a.embedding.tobytes() == b.embedding.tobytes()

    rng = np.random.default_rng(12)
    base = rng.normal(size=32)
    X = np.vstack([base, base, base, -base + 0.3 * rng.normal(size=32)])
    Y = tsne(X, iters=1000, perplexity=1.0, seed=0).embedding
    dup = max(np.linalg.norm(Y[i] - Y[j]) for i, j in itertools.combinations(range(3), 2))
    out = min(np.linalg.norm(Y[i] - Y[3]) for i in range(3))
    detail(request, f"KL decreased on {decreases}/10; bit-identical rerun {identical}; dup {dup:.2e} < outlier {out:.2f}")
    assert decreases == 10 and identical and dup < out


@pytest.mark.acceptance(13, "macro-F1 oracle")
def test_ac13_macro_f1(request):
    got = macro_f1([B.DEEP, B.REFLECT, B.REFLECT, B.REFLECT], [B.DEEP, B.DEEP, B.REFLECT, B.REFLECT]).macro_f1
    ident = macro_f1(list(BEHAVIORS) * 3, list(BEHAVIORS) * 3).macro_f1
    detail(request, f"hand case {got:.12f} vs 11/15; identity {ident}")
    assert abs(got - 11 / 15) <= 1e-12 and ident == 1.0


# ---------------------------------------------------------------- 14: offline end to end

_RAW = [
    "Let me read the problem. We need the sum of the first n odd numbers.\n\n"
    "First, try small cases: 1, 1+3=4, 1+3+5=9.\n\nThese are perfect squares.\n\n"
    "Wait, let me check n=4: 1+3+5+7=16, still a square.\n\n"
    "Alternatively, pair terms from both ends to get n times the middle value.\n\n"
    "Therefore the sum is n squared.\n\nDouble-check with n=5: 25, consistent.\n\n"
    "So the answer is \\boxed{n^2}.",
    "We want the remainder of 2^10 modulo 7.\n\nPowers of 2 mod 7 cycle: 2, 4, 1.\n\n"
    "The cycle length is 3, and 10 = 3*3 + 1.\n\nHmm, that gives 2^10 = 2^1 mod 7.\n\n"
    "Hold on, verify directly: 1024 = 7*146 + 2.\n\nAnother approach: Fermat gives 2^6 = 1 mod 7.\n\n"
    "Then 2^10 = 2^4 = 16 = 2 mod 7.\n\nThe remainder is \\boxed{2}.",
    "Find the area of a right triangle with legs 6 and 8.\n\nThe area is half the product of legs.\n\n"
    "That is 48 / 2 = 24.\n\nMaybe check with Heron: sides 6, 8, 10 and s = 12.\n\n"
    "Area = sqrt(12*6*4*2) = sqrt(576) = 24.\n\nBoth methods agree.\n\n"
    "Let me also consider the altitude to the hypotenuse: 4.8, and 10*4.8/2 = 24.\n\n"
    "Final answer \\boxed{24}.",
]


def _fake_annotator(system, user):
    cur = user.split("CURRENT STEP")[-1]
    h = int(hashlib.sha256(cur.encode()).hexdigest(), 16)
    return f"Reasoning about the step.\n{render_verdict(BEHAVIORS[h % 4])}"


def _embed(text, dim=16):
    v = np.zeros(dim)
    for tok in text.lower().split():
        h = int(hashlib.md5(tok.encode()).hexdigest(), 16)
        v[h % dim] += 1.0 if (h >> 8) & 1 else -1.0
    return (v + 0.01 * np.arange(dim)).tolist()


@pytest.mark.acceptance(14, "offline end-to-end pipeline")
def test_ac14_offline_pipeline(request, tmp_path, monkeypatch):
    from cotmol.trace import read_corpus

    raw = tmp_path / "raw.jsonl"
    raw.write_text("".join(json.dumps({"id": f"p{i}", "query": t.split("\n")[0], "text": t}) + "\n"
                           for i, t in enumerate(_RAW)))
    # record an audit log once through the client with a deterministic stand-in model
    segmented = read_corpus(raw)
    log = tmp_path / "audit.jsonl"
    client = LLMClient(ClientConfig(), transport=CallbackTransport(_fake_annotator), audit_log=log, seed=0)
    for tr in segmented:
        for prev, cur in zip(tr.texts, tr.texts[1:]):
            client(build_annotation_prompt(prev, cur))
    emb = tmp_path / "emb.jsonl"
    emb.write_text("".join(json.dumps({"trace_id": tr.id, "vectors": [_embed(s) for s in tr.texts]}) + "\n"
                           for tr in segmented))

    def no_network(*args, **kwargs):
        raise AssertionError("network access attempted")

    monkeypatch.setattr(socket.socket, "connect", no_network)
    monkeypatch.setattr(socket, "create_connection", no_network)

    def pipeline(root):
        stages = [
            ["segment", "--in", raw, "--out", root / "seg" / "corpus.jsonl"],
            ["annotate", "--in", root / "seg" / "corpus.jsonl", "--replay", log, "--jobs", "2",
             "--out", root / "ann" / "labeled.jsonl"],
            ["graph", "estimate", "--in", root / "ann" / "labeled.jsonl", "--out", root / "graph" / "g.json"],
            ["geometry", "fold", "--in", root / "ann" / "labeled.jsonl", "--embeddings", emb,
             "--reduce", "3", "--iters", "300", "--perplexity", "2", "--seed", "5",
             "--out", root / "fold" / "fold.csv"],
            ["geometry", "fold", "--in", root / "ann" / "labeled.jsonl", "--embeddings", emb,
             "--out", root / "report" / "fold.json"],
        ]
        for argv in stages:
            assert dispatch([str(a) for a in argv]) == 0, argv
        return {p.relative_to(root).as_posix(): p.read_bytes()
                for p in sorted(root.rglob("*")) if p.is_file() and p.name != "manifest.json"}

    first = pipeline(tmp_path / "a")
    # rerun every stage from its manifest alone, into a fresh tree
    rerun_root = tmp_path / "b"
    for stage in ("seg", "ann", "graph", "fold", "report"):
        manifest = json.loads((tmp_path / "a" / stage / "manifest.json").read_text())
        argv = [str(a).replace(str(tmp_path / "a") + os.sep, str(rerun_root) + os.sep) for a in manifest["command"][1:]]
        assert dispatch(argv) == 0
        out = manifest["command"][manifest["command"].index("--out") + 1]
        assert manifest["output"][os.path.basename(out)] == hashlib.sha256(
            (rerun_root / stage / os.path.basename(out)).read_bytes()).hexdigest()
    second = {p.relative_to(rerun_root).as_posix(): p.read_bytes()
              for p in sorted(rerun_root.rglob("*")) if p.is_file() and p.name != "manifest.json"}
    labeled = [json.loads(l) for l in first["ann/labeled.jsonl"].decode().splitlines()]
    detail(request, f"{len(first)} artifacts, {sum(len(r['labels']) for r in labeled)} edges annotated from replay; "
                    f"identical on rerun {first == second}")
    assert first == second
    assert json.loads(first["graph/g.json"])["labels"] == ["N", "D", "R", "E"]
