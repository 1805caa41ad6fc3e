"""Command-line entry point: ``tlagent <subcommand> ...``.

Standard output carries only machine-readable records (JSON, one per line;
``compile --export-dfa`` prints the DFA text dump).  Diagnostics go to
standard error.  Exit codes: 0 success, 1 domain error, 2 usage error
(including a malformed ``--spec``).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .agent import AgentEngine, DryRunExecutor, LiveExecutor, load_rules, replay, write_log
from .automaton import compile_dfa
from .errors import ConfigError, FormulaError, FormulaSyntaxError, MetricError, TLAgentError
from .formula import Atom, iter_postorder
from .metrics import (fidelity_report, fidelity_scores, format_table, search_metrics,
                      search_report, tool_call_accuracy, tool_report)
from .parser import format_formula, parse_formula
from .pipeline import MODES, run_pipeline
from .probability import neusv_score
from .search import Monitor, SearchConfig, find_spans
from .traces import iter_stream_frames, load_annotation, load_scenario, load_trace, save_annotation, save_trace, synthesize_trace

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    pass


def _emit(rec) -> None:
    sys.stdout.write(json.dumps(rec) + "\n")
    sys.stdout.flush()


def _spec(text: str):
    try:
        return parse_formula(text)
    except FormulaSyntaxError as exc:
        pointer = " " * exc.position + "^"
        raise UsageError(f"tl-core: {exc}\n  {text}\n  {pointer}") from None
    except FormulaError as exc:
        raise UsageError(f"tl-core: {exc}") from None


def _ast(f) -> dict:
    done: dict = {}
    for node in iter_postorder(f):
        if isinstance(node, Atom):
            tree = {"op": "Atom", "name": node.name}
        else:
            tree = {"op": type(node).__name__}
            if hasattr(node, "lo") and getattr(node, "lo", None) is not None:
                tree["bounds"] = [node.lo, node.hi]
            if node.children:
                tree["args"] = [done[c] for c in node.children]
        done[node] = tree
    return done[f]


def cmd_parse(args) -> int:
    f = _spec(args.spec)
    _emit({"spec": args.spec, "formula": format_formula(f), "ast": _ast(f)})
    return 0


def cmd_compile(args) -> int:
    f = _spec(args.spec)
    d = compile_dfa(f, state_cap=args.state_cap, bounds=args.bounds)
    if args.export_dfa:
        sys.stdout.write(d.export())
        return 0
    _emit({"spec": args.spec, "propositions": list(d.propositions), "states": d.num_states,
           "transitions": d.num_states * d.num_letters,
           "accepting": int(d.accepting.sum())})
    return 0


def cmd_score(args) -> int:
    f = _spec(args.spec)
    tr = load_trace(args.trace)
    res = neusv_score(f, tr)
    _emit({**res.to_record(), "spec": args.spec})
    return 0


def cmd_search(args) -> int:
    f = _spec(args.spec)
    tr = load_trace(args.trace)
    cfg = SearchConfig(MODES[args.mode], tau=args.tau, rho=args.rho, max_window=args.max_window)
    for s in find_spans(f, tr, cfg):
        _emit({"video_id": tr.video_id, **s.to_record()})
    return 0


def _open_log(path):
    return open(path, "w", encoding="utf-8") if path else sys.stdout


def cmd_monitor(args) -> int:
    if not args.spec and not args.rules:
        raise UsageError("monitor needs --spec or --rules")
    monitors = []
    if args.spec:
        monitors.append((Monitor(_spec(args.spec), tau=args.tau, max_window=args.max_window,
                                 suppression=args.suppression, spec_id=args.spec), False))
    engine = None
    if args.rules:
        rules = load_rules(args.rules, allow_commands=args.allow_commands)
        executor = DryRunExecutor() if args.dry_run else LiveExecutor(args.allow_commands)
        engine = AgentEngine(rules, executor, video_id=args.video_id)
        for r in rules.ordered():
            monitors.append((Monitor(r.dfa, tau=args.tau, max_window=args.max_window,
                                     suppression="span", spec_id=r.id), True))
    props: list = []
    for m, _ in monitors:
        props.extend(p for p in m.propositions if p not in props)
    stream = open(args.input, encoding="utf-8") if args.input else sys.stdin
    out = _open_log(args.log) if engine else None
    try:
        for t, fc in iter_stream_frames(stream, props):
            for m, drives in monitors:
                for ev in m.step(fc):
                    if drives:
                        engine.on_match(ev)
                    else:
                        _emit(ev.to_record())
            if engine:
                write_log(engine.advance(t), out)
                out.flush()
        if engine:
            write_log(engine.finish(), out)
    finally:
        if args.input:
            stream.close()
        if out is not None and out is not sys.stdout:
            out.close()
    return 0


def cmd_agent(args) -> int:
    rules = load_rules(args.rules, allow_commands=args.allow_commands)
    tr = load_trace(args.trace)
    executor = DryRunExecutor() if args.dry_run else LiveExecutor(args.allow_commands)
    log = replay(rules, tr, executor, tau=args.tau, max_window=args.max_window)
    out = _open_log(args.log)
    try:
        write_log(log, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_synth(args) -> int:
    script = load_scenario(args.scenario, seed=args.seed)
    tr, ann = synthesize_trace(script)
    save_trace(tr, args.out_trace)
    save_annotation(ann, args.out_annotation)
    _emit({"video_id": tr.video_id, "frames": len(tr), "seed": args.seed,
           "trace": str(args.out_trace), "annotation": str(args.out_annotation)})
    return 0


def _load_spans(path) -> list:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = [json.loads(line) for line in text.splitlines() if line.strip()]
    if isinstance(doc, dict):
        if "spans" not in doc:
            raise MetricError(f"{path}: no 'spans' field")
        doc = doc["spans"]
    spans = []
    for item in doc:
        if isinstance(item, dict):
            spans.append((int(item["start"]), int(item["end"])))
        else:
            spans.append((int(item[0]), int(item[1])))
    return spans


def _report(records) -> None:
    for rec in records:
        _emit(rec)
    sys.stderr.write(format_table(records) + "\n")


def cmd_eval_search(args) -> int:
    if len(args.pred) != len(args.gt):
        raise UsageError("--pred and --gt need the same number of files")
    traces = args.trace or []
    if traces and len(traces) != len(args.gt):
        raise UsageError("--trace must be given once per --gt file")
    results = []
    for k, (p, g) in enumerate(zip(args.pred, args.gt)):
        T = args.num_frames
        if traces:
            T = len(load_trace(traces[k]))
        ann = load_annotation(g, T)
        pred = _load_spans(p)
        if T is None:
            T = max([e for _, e in list(pred) + list(ann.spans)], default=-1) + 1
        results.append((ann.video_id, search_metrics(pred, ann.spans, T, args.iou_min)))
    _report(search_report(results))
    return 0


def cmd_eval_tools(args) -> int:
    if len(args.log) != len(args.gt):
        raise UsageError("--log and --gt need the same number of files")
    from .agent import read_log
    rules = load_rules(args.rules, allow_commands=True) if args.rules else None
    results = []
    for lp, g in zip(args.log, args.gt):
        ann = load_annotation(g)
        log = read_log(lp)
        for tol in args.tol:
            results.append((ann.video_id, tool_call_accuracy(log, ann.invocations, tol, rules)))
    _report(tool_report(results))
    return 0


def cmd_eval_fidelity(args) -> int:
    f = _spec(args.spec)
    scores = fidelity_scores(f, [load_trace(p) for p in args.trace])
    _report(fidelity_report(scores))
    return 0


def cmd_pipeline(args) -> int:
    summary = run_pipeline(args.config, output_dir=args.output_dir)
    _emit(summary)
    return 0


def _window(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def _unit(value: str) -> float:
    x = float(value)
    if not 0.0 <= x <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0,1]")
    return x


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tlagent", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"tlagent {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log tool activity to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="print the canonical form and AST of a formula")
    p.add_argument("--spec", required=True)
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("compile", help="compile a formula to a DFA")
    p.add_argument("--spec", required=True)
    p.add_argument("--export-dfa", action="store_true", help="print the DFA text dump")
    p.add_argument("--state-cap", type=_window, default=10000)
    p.add_argument("--bounds", choices=("native", "expand"), default="native")
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("score", help="satisfaction probability of a whole trace")
    p.add_argument("--spec", required=True)
    p.add_argument("--trace", required=True)
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("search", help="find clips satisfying a formula")
    p.add_argument("--spec", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--mode", choices=("boolean", "prob"), default="boolean")
    p.add_argument("--tau", type=_unit, default=0.5)
    p.add_argument("--rho", type=_unit, default=0.5)
    p.add_argument("--max-window", type=_window, default=600)
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("monitor", help="match a frame stream online")
    p.add_argument("--spec")
    p.add_argument("--rules")
    p.add_argument("--input", help="read frames from a file instead of stdin")
    p.add_argument("--log", help="write invocation records here instead of stdout")
    p.add_argument("--tau", type=_unit, default=0.5)
    p.add_argument("--max-window", type=_window, default=600)
    p.add_argument("--suppression", choices=("span", "none"), default="span")
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--allow-commands", action="store_true")
    p.add_argument("--video-id", default="stream")
    p.set_defaults(fn=cmd_monitor)

    p = sub.add_parser("agent", help="replay a trace through trigger rules")
    p.add_argument("--rules", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--log", help="write the invocation log here instead of stdout")
    p.add_argument("--tau", type=_unit, default=0.5)
    p.add_argument("--max-window", type=_window, default=600)
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--allow-commands", action="store_true")
    p.set_defaults(fn=cmd_agent)

    p = sub.add_parser("synth", help="synthesize a trace and annotation from a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-trace", required=True)
    p.add_argument("--out-annotation", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("eval", help="metric reports")
    esub = p.add_subparsers(dest="metric", required=True)
    e = esub.add_parser("search", help="frame and span F1")
    e.add_argument("--pred", nargs="+", required=True)
    e.add_argument("--gt", nargs="+", required=True)
    e.add_argument("--trace", nargs="+")
    e.add_argument("--num-frames", type=int)
    e.add_argument("--iou-min", type=float, default=0.5)
    e.set_defaults(fn=cmd_eval_search)
    e = esub.add_parser("tools", help="tool-calling accuracy")
    e.add_argument("--log", nargs="+", required=True)
    e.add_argument("--gt", nargs="+", required=True)
    e.add_argument("--rules")
    e.add_argument("--tol", type=int, nargs="+", default=[0])
    e.set_defaults(fn=cmd_eval_tools)
    e = esub.add_parser("fidelity", help="temporal-fidelity scores of traces")
    e.add_argument("--spec", required=True)
    e.add_argument("--trace", nargs="+", required=True)
    e.set_defaults(fn=cmd_eval_fidelity)

    p = sub.add_parser("pipeline", help="synthesize, search, replay and evaluate from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", help="override the config's output directory")
    p.set_defaults(fn=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    if args.verbose:
        import logging
        logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(message)s")
    try:
        return args.fn(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"{exc}\n")
        return 2
    except ConfigError as exc:
        sys.stderr.write(f"{exc.module}: {exc}\n")
        return 2
    except TLAgentError as exc:
        sys.stderr.write(f"{exc.module}: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"io: {exc}\n")
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
