"""One-shot reproduction: synthesize, search, replay the agent, evaluate.

Config file (paths relative to the config's directory)::

    {"scenario": path, "spec": str, "rules": path, "seed": int, "output_dir": path,
     "noise": {...}, "dry_run": bool, "search": {"mode", "tau", "rho", "max_window"},
     "iou_min": float, "tolerances": [int]}

Only the first five keys are required.  Every artifact except the
timestamps inside ``invocations.jsonl`` is a pure function of the config.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

from .agent import DryRunExecutor, LiveExecutor, load_rules, replay, write_log
from .errors import ConfigError, PipelineError, TLAgentError
from .metrics import DEFAULT_TOLERANCES, search_metrics, search_report, tool_call_accuracy, tool_report
from .parser import parse_formula
from .search import SearchConfig, find_spans
from .traces import load_scenario, save_annotation, save_trace, synthesize_trace

__all__ = ["REQUIRED_FIELDS", "load_config", "run_pipeline"]

REQUIRED_FIELDS = ("scenario", "spec", "rules", "seed", "output_dir")
MODES = {"boolean": "boolean", "prob": "probabilistic", "probabilistic": "probabilistic"}


def load_config(path) -> tuple[dict, Path]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    for key in REQUIRED_FIELDS:
        if key not in doc:
            raise ConfigError(f"config is missing required field {key!r}")
    return doc, path.parent


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except TLAgentError as exc:
        raise PipelineError(name, f"{exc.module}: {exc}") from exc


def _write_jsonl(path: Path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r) + "\n")


def run_pipeline(config, output_dir=None) -> dict:
    """Run every stage and return the summary (also written to ``summary.json``).

    ``config`` is a path or an already loaded mapping (then relative paths
    resolve against the working directory).
    """
    if isinstance(config, Mapping):
        doc, base = dict(config), Path(".")
        for key in REQUIRED_FIELDS:
            if key not in doc:
                raise ConfigError(f"config is missing required field {key!r}")
    else:
        doc, base = load_config(config)
    seed = doc["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("config field 'seed' must be an integer")
    out = Path(output_dir) if output_dir is not None else base / doc["output_dir"]
    search = dict(doc.get("search", {}))
    mode = MODES.get(search.get("mode", "boolean"))
    if mode is None:
        raise ConfigError(f"unknown search mode {search.get('mode')!r}")
    tolerances = [int(t) for t in doc.get("tolerances", DEFAULT_TOLERANCES)]
    iou_min = float(doc.get("iou_min", 0.5))
    dry_run = bool(doc.get("dry_run", True))

    overrides = {"seed": seed}
    if "noise" in doc:
        overrides["noise"] = doc["noise"]
    script = _stage("synthesize", load_scenario, base / doc["scenario"], **overrides)
    trace, ann = _stage("synthesize", synthesize_trace, script)
    out.mkdir(parents=True, exist_ok=True)
    save_trace(trace, out / "trace.json")
    save_annotation(ann, out / "annotation.json")

    spec = doc["spec"]
    formula = _stage("search", parse_formula, spec)
    cfg = _stage("search", SearchConfig, mode, tau=float(search.get("tau", 0.5)),
                 rho=float(search.get("rho", 0.5)),
                 max_window=int(search.get("max_window", 600)))
    spans = _stage("search", find_spans, formula, trace, cfg)
    _write_jsonl(out / "spans.jsonl", [s.to_record() for s in spans])

    rules = _stage("agent", load_rules, base / doc["rules"],
                   allow_commands=doc.get("allow_commands"))
    executor = DryRunExecutor() if dry_run else LiveExecutor(doc.get("allow_commands"))
    log = _stage("agent", replay, rules, trace, executor, tau=cfg.tau, max_window=cfg.max_window)
    with open(out / "invocations.jsonl", "w", encoding="utf-8") as fh:
        write_log(log, fh)

    pred = [(s.start, s.end) for s in spans]
    sm = _stage("eval", search_metrics, pred, ann.spans, len(trace), iou_min)
    tms = [_stage("eval", tool_call_accuracy, log, ann.invocations, tol, rules)
           for tol in tolerances]
    report = search_report([(ann.video_id, sm)]) + tool_report([(ann.video_id, m) for m in tms])
    _write_jsonl(out / "report.jsonl", report)

    summary = {
        "video_id": ann.video_id,
        "spec": spec,
        "seed": seed,
        "frames": len(trace),
        "dry_run": dry_run,
        "spans": [list(p) for p in pred],
        "ground_truth_spans": [list(s) for s in ann.spans],
        "frame_f1": sm.frame.f1,
        "span_f1": sm.span.f1,
        "search": sm.to_record(),
        "tools": {str(m.tol): m.to_record() for m in tms},
        "invocations": [{"rule": r.rule, "frame": r.frame, "status": r.status} for r in log],
        "artifacts": ["trace.json", "annotation.json", "spans.jsonl", "invocations.jsonl",
                      "report.jsonl", "summary.json"],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1) + "\n", encoding="utf-8")
    return summary
