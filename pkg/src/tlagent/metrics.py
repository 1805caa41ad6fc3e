"""Search and tool-calling metrics, plus report aggregation.

Precision over an empty prediction set (or recall over an empty ground
truth) is 1.0 when the other side is empty too and 0.0 otherwise, so two
empty lists score a perfect 1.0 and an empty prediction against real events
scores 0.0.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .agent import SUCCESS, InvocationRecord, RuleSet
from .errors import MetricError
from .probability import neusv_score
from .traces import FrameTrace, GroundTruthInvocation

__all__ = [
    "PRF", "SearchMetrics", "ToolMetrics", "frame_f1", "span_iou", "span_f1", "search_metrics",
    "tool_call_accuracy", "fidelity_scores", "search_report", "tool_report", "fidelity_report",
    "format_table", "DEFAULT_TOLERANCES",
]

DEFAULT_TOLERANCES = (0, 5, 30)


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "PRF":
        p = tp / (tp + fp) if tp + fp else (1.0 if fn == 0 else 0.0)
        r = tp / (tp + fn) if tp + fn else (1.0 if fp == 0 else 0.0)
        # 2PR/(P+R) rewritten over counts avoids rounding (0.6, 1.0 -> 0.75 exactly)
        if tp:
            f1 = 2 * tp / (2 * tp + fp + fn)
        else:
            f1 = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f1, tp, fp, fn)


@dataclass(frozen=True)
class SearchMetrics:
    frame: PRF
    span: PRF
    iou_min: float

    def to_record(self) -> dict:
        return {"frame": asdict(self.frame), "span": asdict(self.span), "iou_min": self.iou_min}


@dataclass(frozen=True)
class ToolMetrics:
    selection: float
    arguments: float
    alignment: float
    gt: int
    executed: int
    matched: int
    fields: int
    fields_correct: int
    aligned: int
    tol: int = 0

    def to_record(self) -> dict:
        return asdict(self)


def _spans(spans, T: int | None, what: str) -> list:
    out = []
    for sp in spans:
        s, e = int(sp[0]), int(sp[1])
        if e < s:
            raise MetricError(f"{what} span [{s},{e}] ends before it starts")
        if s < 0 or (T is not None and e >= T):
            raise MetricError(f"{what} span [{s},{e}] outside [0,{T})")
        out.append((s, e))
    return out


def frame_f1(pred, gt, T: int) -> PRF:
    """Frame-level precision/recall/F1 of predicted against true spans."""
    if T < 0:
        raise MetricError("frame count must be nonnegative")
    masks = []
    for spans, what in ((pred, "predicted"), (gt, "ground-truth")):
        m = np.zeros(T, dtype=bool)
        for s, e in _spans(spans, T, what):
            m[s:e + 1] = True
        masks.append(m)
    p, g = masks
    return PRF.from_counts(int((p & g).sum()), int((p & ~g).sum()), int((~p & g).sum()))


def span_iou(a, b) -> float:
    inter = min(a[1], b[1]) - max(a[0], b[0]) + 1
    if inter <= 0:
        return 0.0
    return inter / ((a[1] - a[0] + 1) + (b[1] - b[0] + 1) - inter)


def span_f1(pred, gt, iou_min: float = 0.5) -> PRF:
    """Span-level scores under greedy one-to-one IoU matching."""
    if not 0.0 < iou_min <= 1.0:
        raise MetricError(f"iou_min must lie in (0,1], got {iou_min}")
    pred = sorted(_spans(pred, None, "predicted"))
    gt = sorted(_spans(gt, None, "ground-truth"))
    pairs = []
    for i, a in enumerate(pred):
        for j, b in enumerate(gt):
            iou = span_iou(a, b)
            if iou >= iou_min:
                pairs.append((-iou, a, b, i, j))
    pairs.sort()
    used_p, used_g = set(), set()
    for _, _, _, i, j in pairs:
        if i not in used_p and j not in used_g:
            used_p.add(i)
            used_g.add(j)
    m = len(used_p)
    return PRF.from_counts(m, len(pred) - m, len(gt) - m)


def search_metrics(pred, gt, T: int, iou_min: float = 0.5) -> SearchMetrics:
    return SearchMetrics(frame_f1(pred, gt, T), span_f1(pred, gt, iou_min), iou_min)


def _as_record(r) -> InvocationRecord:
    return r if isinstance(r, InvocationRecord) else InvocationRecord.from_record(r)


def _as_gt(g) -> GroundTruthInvocation:
    if isinstance(g, GroundTruthInvocation):
        return g
    return GroundTruthInvocation(int(g["frame"]), g["tool"], {str(k): str(v) for k, v in
                                                              g.get("args", {}).items()})


def tool_call_accuracy(log: Iterable, gt: Iterable, tol: int = 0,
                       rules: RuleSet | None = None) -> ToolMetrics:
    """Selection, argument and temporal-alignment accuracy of an invocation log.

    Records with status ``ok`` or ``dry-run`` count as executed.  Each
    ground-truth call is matched to the nearest unmatched executed record of
    the same tool within ``tol`` frames.  A matched record is aligned when its
    frame lies in its delay window and, if ``rules`` is given, every rule it
    is ordered after has an executed record earlier in the log.
    """
    if tol < 0:
        raise MetricError("tolerance must be nonnegative")
    records = [_as_record(r) for r in log]
    executed = [(k, r) for k, r in enumerate(records) if r.status in SUCCESS]
    truth = sorted((_as_gt(g) for g in gt), key=lambda g: (g.frame, g.tool, sorted(g.args.items())))

    used: set = set()
    matched = []
    for g in truth:
        best = None
        for k, r in executed:
            if k in used or r.tool != g.tool or abs(r.frame - g.frame) > tol:
                continue
            key = (abs(r.frame - g.frame), r.frame, k)
            if best is None or key < best[0]:
                best = (key, k, r)
        if best is not None:
            used.add(best[1])
            matched.append((g, best[1], best[2]))

    fields = sum(len(g.args) for g, _, _ in matched)
    correct = sum(1 for g, _, r in matched for name, v in g.args.items()
                  if name in r.args and str(r.args[name]) == str(v))

    aligned = 0
    for _, k, r in matched:
        ok = r.window[0] <= r.frame <= r.window[1] if len(r.window) == 2 else True
        if ok and rules is not None and r.rule in rules.rules:
            for b in rules.rules[r.rule].after:
                if not any(rr.rule == b and rr.status in SUCCESS for rr in records[:k]):
                    ok = False
                    break
        aligned += ok

    n = len(truth)
    if n:
        selection = len(matched) / n
    else:
        selection = 1.0 if not executed else 0.0
    arguments = correct / fields if fields else (1.0 if matched else selection)
    alignment = aligned / len(matched) if matched else selection
    return ToolMetrics(selection, arguments, alignment, n, len(executed), len(matched),
                       fields, correct, aligned, tol)


def fidelity_scores(spec, traces: Sequence[FrameTrace]) -> list:
    return [neusv_score(spec, tr) for tr in traces]


def _mean(xs) -> float:
    xs = list(xs)
    return float(sum(xs) / len(xs)) if xs else 0.0


def search_report(results: Sequence[tuple]) -> list[dict]:
    """``results`` holds ``(video_id, SearchMetrics)``; returns per-video
    records followed by one aggregate record."""
    out = [{"kind": "search", "video_id": vid, **m.to_record()} for vid, m in results]
    if results:
        agg = {"kind": "search", "aggregate": True, "videos": len(results)}
        for level in ("frame", "span"):
            prfs = [getattr(m, level) for _, m in results]
            micro = PRF.from_counts(sum(x.tp for x in prfs), sum(x.fp for x in prfs),
                                    sum(x.fn for x in prfs))
            agg[level] = {"micro": asdict(micro),
                          "macro": {k: _mean(getattr(x, k) for x in prfs)
                                    for k in ("precision", "recall", "f1")}}
        out.append(agg)
    return out


def tool_report(results: Sequence[tuple]) -> list[dict]:
    """``results`` holds ``(video_id, ToolMetrics)``, possibly several
    tolerances per video; one aggregate record is added per tolerance."""
    out = [{"kind": "tools", "video_id": vid, **m.to_record()} for vid, m in results]
    for tol in sorted({m.tol for _, m in results}):
        ms = [m for _, m in results if m.tol == tol]
        gt = sum(m.gt for m in ms)
        matched = sum(m.matched for m in ms)
        fields = sum(m.fields for m in ms)
        micro = {
            "selection": matched / gt if gt else _mean(m.selection for m in ms),
            "arguments": (sum(m.fields_correct for m in ms) / fields if fields
                          else _mean(m.arguments for m in ms)),
            "alignment": (sum(m.aligned for m in ms) / matched if matched
                          else _mean(m.alignment for m in ms)),
        }
        macro = {k: _mean(getattr(m, k) for m in ms) for k in ("selection", "arguments", "alignment")}
        out.append({"kind": "tools", "aggregate": True, "tol": tol, "videos": len(ms),
                    "micro": micro, "macro": macro})
    return out


def fidelity_report(scores: Sequence) -> list[dict]:
    out = [{"kind": "fidelity", **s.to_record()} for s in scores]
    if scores:
        out.append({"kind": "fidelity", "aggregate": True, "videos": len(scores),
                    "mean_probability": _mean(s.probability for s in scores)})
    return out


def _cells(rec: Mapping) -> list:
    flat = []
    for k, v in rec.items():
        if isinstance(v, Mapping):
            for kk, vv in v.items():
                if isinstance(vv, Mapping):
                    flat.extend((f"{k}.{kk}.{a}", b) for a, b in vv.items())
                else:
                    flat.append((f"{k}.{kk}", vv))
        elif k not in ("kind", "propositions"):
            flat.append((k, v))
    return flat


def format_table(records: Sequence[Mapping]) -> str:
    """Human-readable rendering of report records (one block per record)."""
    lines = []
    for rec in records:
        title = "aggregate" if rec.get("aggregate") else str(rec.get("video_id", ""))
        lines.append(f"[{rec.get('kind', 'report')}] {title}")
        for k, v in _cells(rec):
            if k == "aggregate":
                continue
            shown = f"{v:.4f}" if isinstance(v, float) else json.dumps(v) if isinstance(v, list) else v
            lines.append(f"  {k:<28} {shown}")
    return "\n".join(lines)
