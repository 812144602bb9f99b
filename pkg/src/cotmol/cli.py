"""Command-line front end: ``cotmol <command> [options]``.

Exit status is 0 on success, 1 on a domain error (bad data, failed
client, violated assumption) and 2 on a usage error. Every command builds
its complete result in memory before anything is written, so a failing
run leaves no partial artifacts. When ``--out`` is given, a
``manifest.json`` describing the run is written next to the output.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .errors import BadConfig, CotmolError, InvalidTrace, MissingAttention, ParseError
from .seeds import derive_seed

logger = logging.getLogger("cotmol")


# --------------------------------------------------------------------------- #
# output plumbing

@dataclass
class Output:
    """What a command produced.

    ``jsonl`` holds dataset records; otherwise ``data`` is the JSON report
    and ``rows`` its tabular form for CSV output.
    """

    data: Any = None
    rows: list | None = None
    fieldnames: list | None = None
    jsonl: list | None = None
    seeds: dict = field(default_factory=dict)


def _format(args) -> str:
    if getattr(args, "format", None):
        return args.format
    out = getattr(args, "out", None)
    return "csv" if out and out.lower().endswith(".csv") else "json"


def _render(args, result: Output) -> bytes:
    from .report import report

    if result.jsonl is not None:
        return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in result.jsonl).encode("utf-8")
    fmt = _format(args)
    if fmt == "csv":
        if result.rows is None:
            raise BadConfig("this command has no tabular form; write JSON instead")
        return report(result.rows, "csv", result.fieldnames)
    return report(result.data, "json")


def _digest(path: str) -> dict:
    if os.path.isdir(path):
        out = {}
        for name in sorted(os.listdir(path)):
            full = os.path.join(path, name)
            if os.path.isfile(full):
                out[name] = _sha256(full)
        return out
    return _sha256(path)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


_NOT_INPUTS = {"out", "audit_log", "config_path"}


def _inputs(args) -> dict:
    found = {}
    for key, val in sorted(vars(args).items()):
        if key in _NOT_INPUTS or not isinstance(val, str):
            continue
        if os.path.exists(val):
            found[val] = _digest(val)
    return found


def _snapshot(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "handler" and _jsonable(v)}


def _jsonable(v) -> bool:
    try:
        json.dumps(v)
        return True
    except TypeError:
        return False


def _write_outputs(args, argv: Sequence[str], payload: bytes, result: Output, started: str) -> None:
    out = args.out
    if out is None:
        sys.stdout.buffer.write(payload)
        sys.stdout.flush()
        return
    folder = os.path.dirname(os.path.abspath(out))
    os.makedirs(folder, exist_ok=True)
    with open(out, "wb") as fh:
        fh.write(payload)
    manifest = {
        "command": ["cotmol", *argv],
        "config": _snapshot(args),
        "seed": args.seed,
        "effective_seeds": result.seeds,
        "inputs": _inputs(args),
        "output": {os.path.basename(out): hashlib.sha256(payload).hexdigest()},
        "version": __version__,
        "started": started,
        "finished": _now(),
    }
    with open(os.path.join(folder, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# --------------------------------------------------------------------------- #
# shared helpers

def _load_json(path: str) -> Any:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc.msg}", line=exc.lineno) from None


def _read_jsonl(path: str) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ParseError(f"{path}: {exc.msg}", line=lineno) from None
    return out


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _alpha(text: str) -> float | None:
    if text == "auto":
        return None
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("alpha must be 'auto' or a positive number") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("alpha must be positive")
    return v


def _override(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"override must look like deep=0.5, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"override probability {value!r} is not a number") from None


def _config_file(args) -> dict:
    if not args.config_path:
        return {}
    data = _load_json(args.config_path)
    if not isinstance(data, dict):
        raise BadConfig("config file must hold a JSON object")
    return data


def _client(args, system: str | None = None):
    """Generation capability: replay log when --replay is given, otherwise HTTP."""
    from .llm import ClientConfig, LLMClient, ReplayClient

    if args.replay:
        return ReplayClient.from_log(args.replay, system=system)
    section = dict(_config_file(args).get("client", {}))
    if getattr(args, "endpoint", None):
        section["base_url"] = args.endpoint
    if getattr(args, "model", None):
        section["model"] = args.model
    if system is not None:
        section["system"] = system
    cfg = ClientConfig.from_mapping(section)
    return LLMClient(cfg, audit_log=getattr(args, "audit_log", None), seed=args.seed)


def _graph(path: str):
    from .bondgraph import TransitionMatrix, stationary

    data = _load_json(path)
    try:
        tm = TransitionMatrix.from_json(data)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path}: not a transfer graph ({exc})") from None
    pi = np.asarray(data["pi"], dtype=float) if data.get("pi") is not None else stationary(tm)
    return tm, pi


# --------------------------------------------------------------------------- #
# commands

def cmd_segment(args) -> Output:
    from .trace import read_corpus, trace_to_record

    delims = tuple(d.encode().decode("unicode_escape") for d in args.delimiters) if args.delimiters else None
    items = read_corpus(args.input, delims) if delims else read_corpus(args.input)
    return Output(jsonl=[trace_to_record(it) for it in items])


def cmd_annotate(args) -> Output:
    from .annotate import annotate_trace, llm_classifier
    from .trace import LabeledTrace, read_corpus, trace_to_record

    items = read_corpus(args.input)
    classify = llm_classifier(_client(args))
    out = []
    for item in items:
        trace = item.trace if isinstance(item, LabeledTrace) else item
        if len(trace.steps) < 2:
            logger.warning("trace %r has a single step and no edges", trace.id)
            out.append(trace_to_record(LabeledTrace(trace, ())))
            continue
        out.append(trace_to_record(annotate_trace(trace, classify, max_workers=args.jobs)))
    return Output(jsonl=out)


def cmd_graph_estimate(args) -> Output:
    from .bondgraph import estimate
    from .trace import read_labeled

    tm, pi = estimate(read_labeled(args.input), args.smoothing, args.behaviors.split(","))
    data = tm.to_json(pi)
    rows = [
        {"source": a, "target": b, "p": tm.p[i, j], "count": int(tm.counts[i, j])}
        for i, a in enumerate(tm.labels) for j, b in enumerate(tm.labels)
    ]
    if tm.empty_rows:
        logger.warning("rows without evidence stored uniform: %s", [tm.labels[i] for i in tm.empty_rows])
    return Output(data, rows)


def cmd_graph_compare(args) -> Output:
    from .bondgraph import pearson, total_variation

    a, pi_a = _graph(args.a)
    b, pi_b = _graph(args.b)
    if a.labels != b.labels:
        raise BadConfig(f"label sets differ: {a.labels} vs {b.labels}")
    data = {
        "pearson": pearson(a, b),
        "max_abs_diff": float(np.abs(a.p - b.p).max()),
        "tv_pi": total_variation(pi_a, pi_b),
    }
    return Output(data, [data])


def cmd_graph_stability(args) -> Output:
    from .bondgraph import stability_curve
    from .trace import read_labeled

    curve = stability_curve(read_labeled(args.input), args.sizes, args.trials, args.seed, args.smoothing)
    rows = curve.rows()
    return Output({"points": rows}, rows, seeds={"stability": args.seed})


def _reduced(seqs, args) -> tuple[dict, dict]:
    from .geometry import tsne_reduce

    if args.reduce == 0:
        return {k: s.vectors for k, s in seqs.items()}, {}
    out, seeds = {}, {}
    for i, (k, s) in enumerate(sorted(seqs.items())):
        seed = derive_seed(args.seed, "tsne", i)
        seeds[k] = seed
        out[k] = tsne_reduce(s.vectors, dim=args.reduce, iters=args.iters, perplexity=args.perplexity, seed=seed)
    return out, seeds


def cmd_geometry_fold(args) -> Output:
    from .geometry import adaptive_alpha, cluster, folding_metrics, folding_summary
    from .geometry.io import read_embeddings
    from .trace import read_labeled

    labeled = read_labeled(args.input)
    seqs = read_embeddings(args.embeddings)
    missing = [lt.id for lt in labeled if lt.id not in seqs]
    if missing:
        raise InvalidTrace(f"no embeddings for {len(missing)} traces, e.g. {missing[0]!r}")
    points, seeds = _reduced({lt.id: seqs[lt.id] for lt in labeled}, args)
    records, rows = [], []
    for lt in labeled:
        pts = points[lt.id]
        alpha = args.alpha if args.alpha is not None else adaptive_alpha(pts)
        clusters = cluster(pts, alpha, args.beta)
        for rec in folding_metrics(lt, pts, clusters, include_current=args.include_current):
            records.append(rec)
            rows.append({"trace_id": lt.id, **rec.as_row(), "alpha": alpha})
    data = {"edges": rows, "summary": folding_summary(records, args.group_limit)}
    return Output(data, rows, seeds={"tsne": seeds} if seeds else {})


def cmd_geometry_meb(args) -> Output:
    from .geometry import meb, volume, volume_delta
    from .geometry.io import read_embeddings

    def pooled(path):
        seqs = read_embeddings(path)
        if not seqs:
            raise InvalidTrace(f"{path}: no embeddings")
        per = []
        for k, s in sorted(seqs.items()):
            ball = meb(s.vectors, seed=derive_seed(args.seed, "meb", k))
            per.append({"trace_id": k, "n": len(s), "dim": s.vectors.shape[1],
                        "radius": ball.radius, "volume": volume(ball)})
        allpts = np.vstack([s.vectors for _, s in sorted(seqs.items())])
        ball = meb(allpts, seed=derive_seed(args.seed, "meb", "pooled"))
        return per, {"n": int(allpts.shape[0]), "dim": int(allpts.shape[1]),
                     "radius": ball.radius, "volume": volume(ball)}

    per, pool = pooled(args.embeddings)
    data = {"per_trace": per, "pooled": pool}
    if args.baseline:
        _, base = pooled(args.baseline)
        data["baseline"] = base
        data["direction"] = args.direction
        data["volume_delta_percent"] = volume_delta(base["volume"], pool["volume"], args.direction)
    return Output(data, per)


def cmd_geometry_phase(args) -> Output:
    from .geometry import oscillations, phase_trajectory

    traces, rows = [], []
    for rec in _read_jsonl(args.input):
        try:
            tid, values = str(rec["trace_id"]), rec["I"]
        except (KeyError, TypeError):
            raise ParseError(f"{args.input}: records need 'trace_id' and 'I'") from None
        traj = phase_trajectory(values, args.slope, args.entropy_step)
        tr_rows = traj.rows()
        rows.extend({"trace_id": tid, **r} for r in tr_rows)
        traces.append({"trace_id": tid, "oscillations": oscillations(traj.states), "steps": tr_rows})
    return Output({"traces": traces}, rows, ["trace_id", "t", "I", "dI", "m", "state"])


def _attention_for(folder: str, trace_id: str):
    from .energy import read_attention, read_spans

    for name in (f"{trace_id}.catt", f"{trace_id}.attn.jsonl"):
        path = os.path.join(folder, name)
        if os.path.exists(path):
            break
    else:
        raise MissingAttention(f"no attention file for trace {trace_id!r} in {folder}")
    spans_path = os.path.join(folder, f"{trace_id}.spans.json")
    if not os.path.exists(spans_path):
        raise MissingAttention(f"no span file for trace {trace_id!r} in {folder}")
    return read_attention(path), read_spans(spans_path)


def cmd_energy_empirical(args) -> Output:
    from .energy import bond_energies, ordering_report
    from .geometry.io import read_embeddings
    from .trace import read_labeled

    labeled = read_labeled(args.input)
    embs = read_embeddings(args.embeddings) if args.embeddings else {}
    samples = []
    for lt in labeled:
        attn, spans = _attention_for(args.attention_dir, lt.id)
        emb = embs[lt.id].vectors if lt.id in embs else None
        samples.extend(bond_energies(lt, attn, spans, emb))
    seed = derive_seed(args.seed, "bootstrap")
    rep = ordering_report(samples, n_boot=args.n_boot, seed=seed)
    return Output({"ordering": rep.to_json(), "samples": [s.as_row() for s in samples]},
                  [s.as_row() for s in samples], seeds={"bootstrap": seed})


def cmd_energy_rope_mc(args) -> Output:
    from .energy import RopeConfig, rope_mc

    cfg = RopeConfig(d_k=args.dk, rho=args.rho, freqs=args.freqs, distances=args.distances,
                     samples=args.n, seed=args.seed, method=args.method)
    cfg.check_assumptions()
    res = rope_mc(cfg)
    data = res.to_json()
    return Output(data, data["distances"], seeds={"rope_mc": args.seed})


def cmd_energy_ergodic(args) -> Output:
    from .energy import ergodic_energy_sim, routing_bound, routing_check

    tm, _ = _graph(args.graph)
    k = len(tm.labels)
    if len(args.mu) != k or len(args.spread) != k:
        raise BadConfig(f"--mu and --spread need {k} values in label order {tm.labels}")
    seed = derive_seed(args.seed, "ergodic")
    res = ergodic_energy_sim(tm, args.mu, args.spread, args.T, seed=seed)
    data = res.to_json()
    if args.routing:
        b, c = (tm.index(x) for x in args.routing.split(","))
        delta = args.routing_half_width
        frac, worst = routing_check(args.mu[b], args.mu[c], delta, seed=derive_seed(args.seed, "routing"))
        data["routing"] = {"b": tm.labels[b], "c": tm.labels[c], "half_width": delta,
                           "bound": routing_bound(args.mu[b], args.mu[c], delta),
                           "fraction_meeting_bound": frac, "worst_ratio_over_bound": worst}
    return Output(data, [{k2: v for k2, v in data.items() if not isinstance(v, (list, dict))}],
                  seeds={"ergodic": seed})


def cmd_energy_paths(args) -> Output:
    from .energy import PathGraph, build_step_graph, enumerate_paths, read_attention, read_spans, softmin_energy

    if args.graph:
        graph = PathGraph.from_json(_load_json(args.graph))
    elif args.attention and args.spans:
        graph = build_step_graph(read_attention(args.attention), read_spans(args.spans), args.edge_threshold)
    else:
        raise BadConfig("give --graph, or both --attention and --spans")
    source = _node(args.source, graph.nodes[0] if graph.nodes else None)
    target = _node(args.target, graph.nodes[-1] if graph.nodes else None)
    data: dict = {"source": source, "target": target, "softmin_energy": softmin_energy(graph, source, target),
                  "graph": graph.to_json()}
    rows = None
    if args.enumerate:
        paths = enumerate_paths(graph, source, target)
        rows = [{"path": p, "energy": e} for p, e in sorted(paths, key=lambda pe: (pe[1], str(pe[0])))]
        data["paths"] = rows
    return Output(data, rows if rows is not None else [{"source": source, "target": target,
                                                         "softmin_energy": data["softmin_energy"]}])


def _node(text: str | None, default):
    if text is None:
        return default
    try:
        return int(text)
    except ValueError:
        return text


def cmd_synth(args) -> Output:
    from .bondgraph import override
    from .synth import SynthesisConfig, synthesize_many

    tm, _ = _graph(args.graph)
    for name, prob in args.override:
        tm = override(tm, name, prob)
    questions = []
    for rec in _read_jsonl(args.questions):
        q = rec if isinstance(rec, str) else (rec.get("question") or rec.get("query")) if isinstance(rec, dict) else None
        if not isinstance(q, str) or not q.strip():
            raise ParseError(f"{args.questions}: each record needs a 'question' string")
        questions.append(q)
    cfg = SynthesisConfig(tm, start=args.start, max_steps=args.max_steps,
                          stop_on_boxed=not args.no_stop_on_boxed, seed=args.seed,
                          rationale_window=args.rationale_window)
    client = _client(args)
    traces = synthesize_many(questions, cfg, client, max_workers=args.jobs)
    return Output(jsonl=[t.to_json() for t in traces],
                  seeds={"synth": [t.seed for t in traces]})


def cmd_transform_keywords(args) -> Output:
    from .synth import apply_keyword_plan, build_plan, load_table
    from .trace import read_corpus, trace_to_record

    plan = build_plan(args.plan, load_table(args.table) if args.table else None)
    return Output(jsonl=[trace_to_record(apply_keyword_plan(it, plan)) for it in read_corpus(args.input)])


def cmd_transform_summarize(args) -> Output:
    from .synth import summarization_prompt
    from .trace import read_corpus

    items = read_corpus(args.input)
    prompts = [(it.id, it.trace.query if hasattr(it, "trace") else it.query, summarization_prompt(it))
               for it in items]
    if args.prompts_only:
        return Output(jsonl=[{"id": i, "query": q, "prompt": p} for i, q, p in prompts])
    client = _client(args)
    return Output(jsonl=[{"id": i, "query": q, "summary": client(p)} for i, q, p in prompts])


def cmd_transform_shift(args) -> Output:
    from .synth import distribution_shift

    a, pi_a = _graph(args.a)
    b, pi_b = _graph(args.b)
    rep = distribution_shift(pi_a, pi_b, a, b)
    return Output(rep.to_json(), [rep.to_json()])


def cmd_replay(args) -> Output:
    from .llm import prompt_key

    records = _read_jsonl(args.log) if os.path.getsize(args.log) else []
    responses: dict[str, set] = {}
    for k, rec in enumerate(records, 1):
        try:
            key = prompt_key(rec.get("system"), rec["user"])
        except (KeyError, AttributeError, TypeError):
            raise ParseError(f"{args.log}: record {k} is not a chat exchange") from None
        if rec.get("key") not in (None, key):
            raise ParseError(f"{args.log}: record {k} key does not match its prompt")
        responses.setdefault(key, set()).add(rec.get("response"))
    conflicts = sorted(k for k, v in responses.items() if len(v) > 1)
    data = {"records": len(records), "unique_prompts": len(responses),
            "conflicting_prompts": len(conflicts), "conflicts": conflicts}
    if conflicts:
        logger.warning("%d prompts have differing responses; replay serves the last one", len(conflicts))
    return Output(data, [{k: v for k, v in data.items() if k != "conflicts"}])


# --------------------------------------------------------------------------- #
# parser

def _add_globals(p: argparse.ArgumentParser, leaf: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if leaf else (lambda v: v)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=d(0), help="master seed (default 0)")
    g.add_argument("--jobs", type=int, default=d(os.cpu_count() or 1), help="worker threads")
    g.add_argument("--out", default=d(None), help="output file; a manifest.json is written beside it")
    g.add_argument("--format", choices=("json", "csv"), default=d(None),
                   help="report format (default: from the --out extension)")
    g.add_argument("--config", dest="config_path", default=d(None), help="JSON config file")
    g.add_argument("--replay", default=d(None), metavar="LOG", help="serve model calls from an audit log")
    g.add_argument("--quiet", action="store_true", default=d(False), help="only print errors")


def _client_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--endpoint", help="chat-completions base URL (else COTMOL_BASE_URL)")
    p.add_argument("--model", help="model name")
    p.add_argument("--audit-log", help="append every exchange to this JSONL log")


def build_parser() -> argparse.ArgumentParser:
    root = argparse.ArgumentParser(prog="cotmol", description="Behavior-graph analysis of chain-of-thought traces.")
    root.add_argument("--version", action="version", version=f"cotmol {__version__}")
    _add_globals(root, leaf=False)
    sub = root.add_subparsers(dest="command", metavar="command", required=True)

    def leaf(parent, name: str, handler: Callable, help_: str) -> argparse.ArgumentParser:
        p = parent.add_parser(name, help=help_, description=help_)
        _add_globals(p, leaf=True)
        p.set_defaults(handler=handler)
        return p

    def group(name: str, help_: str):
        p = sub.add_parser(name, help=help_, description=help_)
        return p.add_subparsers(dest="action", metavar="action", required=True)

    p = leaf(sub, "segment", cmd_segment, "split raw traces into steps")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--delimiters", nargs="+", help="delimiters in priority order (escapes like \\n allowed)")

    p = leaf(sub, "annotate", cmd_annotate, "label every edge with a behavior via a model")
    p.add_argument("--in", dest="input", required=True)
    _client_flags(p)

    g = group("graph", "transfer-graph estimation and comparison")
    p = leaf(g, "estimate", cmd_graph_estimate, "estimate P and pi from a labeled corpus")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--smoothing", type=float, default=0.0)
    p.add_argument("--behaviors", default="N,D,R,E", help="state subset, comma separated")
    p = leaf(g, "compare", cmd_graph_compare, "Pearson and marginal TV between two graphs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p = leaf(g, "stability", cmd_graph_stability, "Pearson stability across subsample sizes")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--sizes", type=_ints, required=True, help="e.g. 500,1000,2000")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--smoothing", type=float, default=0.0)

    g = group("geometry", "folding, enclosing balls and phase space")
    p = leaf(g, "fold", cmd_geometry_fold, "per-edge folding metrics")
    p.add_argument("--in", dest="input", required=True, help="labeled corpus")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--alpha", type=_alpha, default=None, help="'auto' (default) or a value")
    p.add_argument("--beta", type=float, default=None, help="cluster adjacency radius (default 2*alpha)")
    p.add_argument("--reduce", type=int, choices=(0, 2, 3), default=0, help="t-SNE target dim; 0 keeps input")
    p.add_argument("--iters", type=int, default=5000)
    p.add_argument("--perplexity", type=float, default=None)
    p.add_argument("--include-current", action="store_true", help="return distance may use step t itself")
    p.add_argument("--group-limit", type=float, default=3.0)
    p = leaf(g, "meb", cmd_geometry_meb, "minimum enclosing balls and volume deltas")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--baseline", help="embeddings of the reference condition")
    p.add_argument("--direction", choices=("reduction", "expansion"), default="reduction")
    p = leaf(g, "phase", cmd_geometry_phase, "information phase-space states")
    p.add_argument("--in", dest="input", required=True, help='JSONL of {"trace_id", "I": [...]}')
    p.add_argument("--slope", type=float, default=0.6)
    p.add_argument("--entropy-step", type=float, default=0.05)

    g = group("energy", "attention-energy diagnostics")
    p = leaf(g, "empirical", cmd_energy_empirical, "bond energies from attention logits")
    p.add_argument("--in", dest="input", required=True, help="labeled corpus")
    p.add_argument("--attention-dir", required=True, help="holds <id>.catt|<id>.attn.jsonl and <id>.spans.json")
    p.add_argument("--embeddings", help="step embeddings (needed for reflection edges)")
    p.add_argument("--n-boot", type=int, default=1000)
    p = leaf(g, "rope-mc", cmd_energy_rope_mc, "Monte Carlo check of the rotary energy ordering")
    p.add_argument("--dk", type=int, default=64)
    p.add_argument("--rho", default="geom:0.9,0.8")
    p.add_argument("--freqs", choices=("rope", "identity"), default="rope")
    p.add_argument("--distances", type=_ints, default=[1, 4, 16])
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--method", choices=("reduced", "rotate"), default="reduced")
    p = leaf(g, "ergodic", cmd_energy_ergodic, "time-averaged energy of the behavior chain")
    p.add_argument("--graph", required=True)
    p.add_argument("--mu", type=_floats, required=True, help="mean energy per behavior")
    p.add_argument("--spread", type=_floats, required=True, help="energy std per behavior")
    p.add_argument("--T", type=int, default=100_000)
    p.add_argument("--routing", help="b,c pair for the routing bound, e.g. D,E")
    p.add_argument("--routing-half-width", type=float, default=0.1)
    p = leaf(g, "paths", cmd_energy_paths, "soft-min path energy over a step DAG")
    p.add_argument("--graph", help='JSON {"nodes": [...], "edges": [[u, v, energy], ...]}')
    p.add_argument("--attention")
    p.add_argument("--spans")
    p.add_argument("--edge-threshold", type=float, default=0.05)
    p.add_argument("--source")
    p.add_argument("--target")
    p.add_argument("--enumerate", action="store_true", help="also list every path (small graphs)")

    p = leaf(sub, "synth", cmd_synth, "synthesize traces by a random walk over a transfer graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--questions", required=True, help='JSONL of {"question": ...}')
    p.add_argument("--override", type=_override, action="append", default=[], metavar="BEHAVIOR=P")
    p.add_argument("--start", default="explore")
    p.add_argument("--max-steps", type=int, default=32)
    p.add_argument("--no-stop-on-boxed", action="store_true")
    p.add_argument("--rationale-window", type=int, default=None)
    _client_flags(p)

    g = group("transform", "corpus rewrites and distribution shift")
    p = leaf(g, "keywords", cmd_transform_keywords, "apply a keyword replacement plan")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--plan", choices=("plan1", "plan2", "removal"), required=True)
    p.add_argument("--table", help="keyword TSV (default: bundled table)")
    p = leaf(g, "summarize", cmd_transform_summarize, "compress traces with a model")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--prompts-only", action="store_true", help="emit prompts without calling a model")
    _client_flags(p)
    p = leaf(g, "shift", cmd_transform_shift, "TV and Pearson between two transfer graphs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)

    p = leaf(sub, "replay", cmd_replay, "check an audit log for replay use")
    p.add_argument("--log", required=True)
    return root


def dispatch(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.jobs < 1:
        print("cotmol: error: --jobs must be at least 1", file=sys.stderr)
        return 2
    started = _now()
    try:
        result = args.handler(args)
        payload = _render(args, result)
        _write_outputs(args, argv, payload, result, started)
    except CotmolError as exc:
        print(f"cotmol: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"cotmol: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
