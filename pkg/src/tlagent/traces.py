"""Frame traces, annotations, calibration and seeded scenario synthesis.

This is the perception boundary: detectors upstream produce per-frame
proposition confidences in the JSON schema below, and everything downstream
works on ``FrameTrace`` values.

Trace file::

    {"video_id": str, "fps": number, "propositions": [str],
     "frames": [{"index": int, "confidences": {str: number}}]}

Annotation file::

    {"video_id": str, "query": str, "spec": str, "spans": [[int, int]],
     "invocations": [{"frame": int, "tool": str, "args": {str: str}}]}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence, TextIO

import numpy as np

from .errors import TraceFormatError, UniverseMismatchError
from .logic import BooleanTrace
from .parser import parse_formula

__all__ = [
    "FrameTrace", "Annotation", "GroundTruthInvocation", "ScenarioScript", "Calibration",
    "load_trace", "save_trace", "trace_from_dict", "trace_to_dict", "load_annotation",
    "save_annotation", "annotation_from_dict", "annotation_to_dict", "calibrate",
    "synthesize_trace", "iter_stream_frames", "load_scenario",
]


@dataclass(frozen=True, eq=False)
class FrameTrace:
    """Per-frame confidences for each proposition.

    ``confidences[t, i]`` is the confidence that ``propositions[i]`` holds at
    frame ``t``.  The array is read-only.
    """

    video_id: str
    propositions: tuple
    confidences: np.ndarray
    fps: float = 1

    def __post_init__(self):
        c = np.array(self.confidences, dtype=np.float64)
        props = tuple(self.propositions)
        if c.ndim != 2 or c.shape[0] < 1:
            raise TraceFormatError("a trace needs at least one frame")
        if c.shape[1] != len(props):
            raise TraceFormatError(
                f"{c.shape[1]} confidence columns for {len(props)} propositions")
        if len(set(props)) != len(props):
            raise TraceFormatError("duplicate proposition names")
        if not np.all((c >= 0.0) & (c <= 1.0)):
            t, i = np.argwhere(~((c >= 0.0) & (c <= 1.0)))[0]
            raise TraceFormatError(
                f"confidence {c[t, i]!r} outside [0,1] for {props[i]} at frame {t}")
        if not (isinstance(self.fps, (int, float)) and self.fps > 0 and math.isfinite(self.fps)):
            raise TraceFormatError(f"fps must be a positive number, got {self.fps!r}")
        c.flags.writeable = False
        object.__setattr__(self, "confidences", c)
        object.__setattr__(self, "propositions", props)

    def __len__(self):
        return self.confidences.shape[0]

    def __eq__(self, other):
        if not isinstance(other, FrameTrace):
            return NotImplemented
        return (self.video_id == other.video_id and self.propositions == other.propositions
                and self.fps == other.fps
                and np.array_equal(self.confidences, other.confidences))

    __hash__ = None

    @property
    def num_frames(self) -> int:
        return self.confidences.shape[0]

    def frame(self, t: int) -> dict:
        return dict(zip(self.propositions, self.confidences[t].tolist()))

    def columns(self, propositions: Sequence[str]) -> np.ndarray:
        """Confidence columns reordered to ``propositions``."""
        index = {p: i for i, p in enumerate(self.propositions)}
        missing = [p for p in propositions if p not in index]
        if missing:
            raise UniverseMismatchError(
                f"trace {self.video_id!r} lacks propositions {missing}")
        return self.confidences[:, [index[p] for p in propositions]]

    def window(self, start: int, end: int) -> "FrameTrace":
        return FrameTrace(self.video_id, self.propositions,
                          self.confidences[start:end + 1], self.fps)

    def threshold(self, tau: float) -> BooleanTrace:
        mask = self.confidences >= tau
        return BooleanTrace(
            self.propositions,
            [[p for p, on in zip(self.propositions, row) if on] for row in mask.tolist()])


def trace_from_dict(doc: Mapping, source: str = "trace") -> FrameTrace:
    for key in ("video_id", "propositions", "frames"):
        if key not in doc:
            raise TraceFormatError(f"{source}: missing field {key!r}")
    props = doc["propositions"]
    if not isinstance(props, list) or not all(isinstance(p, str) for p in props):
        raise TraceFormatError(f"{source}: 'propositions' must be a list of strings")
    frames = doc["frames"]
    if not isinstance(frames, list):
        raise TraceFormatError(f"{source}: 'frames' must be a list")
    if not frames:
        raise TraceFormatError(f"{source}: empty frame list")
    rows = []
    for pos, fr in enumerate(frames):
        if not isinstance(fr, Mapping) or "index" not in fr or "confidences" not in fr:
            raise TraceFormatError(f"{source}: frame {pos} needs 'index' and 'confidences'")
        idx = fr["index"]
        if isinstance(idx, bool) or not isinstance(idx, int):
            raise TraceFormatError(f"{source}: frame {pos} has a non-integer index")
        if idx != pos:
            raise TraceFormatError(f"non-contiguous frame index {idx}")
        rows.append(_frame_row(fr["confidences"], props, idx))
    fps = doc.get("fps", 1)
    if isinstance(fps, bool) or not isinstance(fps, (int, float)) or fps <= 0:
        raise TraceFormatError(f"{source}: fps must be a positive number")
    return FrameTrace(str(doc["video_id"]), tuple(props), np.array(rows, dtype=np.float64), fps)


def _frame_row(conf, props: Sequence[str], idx: int) -> list:
    if not isinstance(conf, Mapping):
        raise TraceFormatError(f"frame {idx}: 'confidences' must be an object")
    row = []
    for p in props:
        if p not in conf:
            raise TraceFormatError(f"missing proposition {p} at frame {idx}")
        v = conf[p]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise TraceFormatError(f"confidence for {p} at frame {idx} is not a number")
        if not 0.0 <= v <= 1.0:
            raise TraceFormatError(f"confidence {v} for {p} at frame {idx} outside [0,1]")
        row.append(float(v))
    return row


def trace_to_dict(tr: FrameTrace) -> dict:
    return {
        "video_id": tr.video_id,
        "fps": tr.fps,
        "propositions": list(tr.propositions),
        "frames": [{"index": t, "confidences": dict(zip(tr.propositions, row))}
                   for t, row in enumerate(tr.confidences.tolist())],
    }


def _read_json(path, what: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise TraceFormatError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"{path}: invalid JSON ({exc})") from None


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_trace(path) -> FrameTrace:
    return trace_from_dict(_read_json(path, "trace"), str(path))


def save_trace(tr: FrameTrace, path) -> None:
    """Write the canonical form; ``load_trace`` then ``save_trace`` is byte-stable."""
    _write_json(path, trace_to_dict(tr))


def iter_stream_frames(lines: Iterable[str], propositions: Sequence[str] | None = None
                       ) -> Iterator[tuple[int, dict]]:
    """Parse the streaming protocol: one frame object per line.

    An optional first line carrying ``"propositions"`` (trace header fields)
    declares the universe; otherwise ``propositions`` must be given.  Yields
    ``(index, confidences)`` after the same checks as ``load_trace``.
    """
    expected = 0
    props = list(propositions) if propositions is not None else None
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"stream line {lineno}: invalid JSON ({exc})") from None
        if isinstance(obj, Mapping) and "propositions" in obj and "confidences" not in obj:
            if expected:
                raise TraceFormatError(f"stream line {lineno}: header after frames")
            header = [p for p in obj["propositions"]]
            props = header if props is None else props
            missing = set(props) - set(header)
            if missing:
                raise TraceFormatError(f"stream header lacks propositions {sorted(missing)}")
            continue
        if props is None:
            raise TraceFormatError("stream has no header and no proposition universe")
        if not isinstance(obj, Mapping) or "index" not in obj or "confidences" not in obj:
            raise TraceFormatError(f"stream line {lineno}: needs 'index' and 'confidences'")
        if obj["index"] != expected:
            raise TraceFormatError(f"non-contiguous frame index {obj['index']}")
        row = _frame_row(obj["confidences"], props, expected)
        yield expected, dict(zip(props, row))
        expected += 1


@dataclass(frozen=True)
class GroundTruthInvocation:
    frame: int
    tool: str
    args: Mapping = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"frame": self.frame, "tool": self.tool, "args": dict(self.args)}


@dataclass(frozen=True)
class Annotation:
    video_id: str
    query: str
    spec: str
    spans: tuple
    invocations: tuple = ()


def _check_spans(spans, num_frames=None, source="annotation") -> tuple:
    out = []
    for sp in spans:
        if (not isinstance(sp, (list, tuple)) or len(sp) != 2
                or not all(isinstance(x, int) and not isinstance(x, bool) for x in sp)):
            raise TraceFormatError(f"{source}: span {sp!r} must be a pair of integers")
        s, e = sp
        if e < s:
            raise TraceFormatError(f"{source}: span end before start in [{s},{e}]")
        if s < 0 or (num_frames is not None and e >= num_frames):
            raise TraceFormatError(f"{source}: span [{s},{e}] out of range")
        out.append((s, e))
    for a, b in zip(out, out[1:]):
        if b[0] < a[0]:
            raise TraceFormatError(f"{source}: spans not sorted by start")
    return tuple(out)


def annotation_from_dict(doc: Mapping, num_frames: int | None = None,
                         source: str = "annotation") -> Annotation:
    for key in ("video_id", "spec", "spans"):
        if key not in doc:
            raise TraceFormatError(f"{source}: missing field {key!r}")
    spec = doc["spec"]
    parse_formula(spec)
    spans = _check_spans(doc["spans"], num_frames, source)
    invs = []
    for k, inv in enumerate(doc.get("invocations", [])):
        try:
            frame, tool, args = inv["frame"], inv["tool"], inv.get("args", {})
        except (KeyError, TypeError):
            raise TraceFormatError(f"{source}: invocation {k} needs 'frame' and 'tool'") from None
        if not isinstance(tool, str) or not tool:
            raise TraceFormatError(f"{source}: invocation {k} has an empty tool id")
        if isinstance(frame, bool) or not isinstance(frame, int) or frame < 0:
            raise TraceFormatError(f"{source}: invocation {k} frame must be a nonnegative int")
        if num_frames is not None and frame >= num_frames:
            raise TraceFormatError(f"{source}: invocation {k} frame {frame} out of range")
        invs.append(GroundTruthInvocation(frame, tool, {str(a): str(v) for a, v in args.items()}))
    return Annotation(str(doc["video_id"]), str(doc.get("query", "")), spec, spans, tuple(invs))


def annotation_to_dict(ann: Annotation) -> dict:
    return {
        "video_id": ann.video_id,
        "query": ann.query,
        "spec": ann.spec,
        "spans": [list(s) for s in ann.spans],
        "invocations": [inv.to_dict() for inv in ann.invocations],
    }


def load_annotation(path, num_frames: int | None = None) -> Annotation:
    return annotation_from_dict(_read_json(path, "annotation"), num_frames, str(path))


def save_annotation(ann: Annotation, path) -> None:
    _write_json(path, annotation_to_dict(ann))


@dataclass(frozen=True)
class Calibration:
    """Confidence mapping: ``identity``, ``threshold`` or ``temperature``."""

    method: str = "identity"
    value: float | None = None

    def __post_init__(self):
        if self.method == "threshold":
            if self.value is None or not 0.0 <= self.value <= 1.0:
                raise TraceFormatError("threshold calibration needs tau in [0,1]")
        elif self.method == "temperature":
            if self.value is None or not self.value > 0:
                raise TraceFormatError("temperature calibration needs a positive temperature")
        elif self.method != "identity":
            raise TraceFormatError(f"unknown calibration method {self.method!r}")

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def threshold(cls, tau: float):
        return cls("threshold", tau)

    @classmethod
    def temperature(cls, temp: float):
        return cls("temperature", temp)


def calibrate(tr: FrameTrace, m: Calibration) -> FrameTrace:
    c = tr.confidences
    if m.method == "identity":
        return tr
    if m.method == "threshold":
        out = np.where(c >= m.value, 1.0, 0.0)
    else:
        with np.errstate(divide="ignore"):
            logit = np.log(c) - np.log1p(-c)
        out = 1.0 / (1.0 + np.exp(-logit / m.value))
        out = np.where(c == 0.0, 0.0, np.where(c == 1.0, 1.0, out))
    return FrameTrace(tr.video_id, tr.propositions, out, tr.fps)


@dataclass(frozen=True)
class ScenarioScript:
    """Script for a synthetic trace.

    ``truth`` lists ``(proposition, start, end)`` inclusive intervals.  The
    annotated target event is ``target_spans`` if given, else the frames
    where every proposition in ``target_props`` is true.  Noise is
    Beta(mean * k, (1 - mean) * k); ``true_mean=1, false_mean=0`` is the
    noise-free mode that emits exact 1.0/0.0.
    """

    num_frames: int
    propositions: tuple
    truth: tuple
    seed: int
    true_mean: float = 0.9
    false_mean: float = 0.1
    concentration: float = 20.0
    video_id: str = "synthetic"
    fps: float = 1
    query: str = ""
    spec: str = ""
    target_props: tuple = ()
    target_spans: tuple | None = None
    invocations: tuple = ()

    def __post_init__(self):
        if isinstance(self.num_frames, bool) or not isinstance(self.num_frames, int) \
                or self.num_frames < 1:
            raise TraceFormatError("scenario: num_frames must be a positive integer")
        if not self.propositions or len(set(self.propositions)) != len(self.propositions):
            raise TraceFormatError("scenario: propositions must be nonempty and distinct")
        for p, s, e in self.truth:
            if p not in self.propositions:
                raise TraceFormatError(f"scenario: truth interval for unknown proposition {p}")
            if not 0 <= s <= e < self.num_frames:
                raise TraceFormatError(f"scenario: interval [{s},{e}] for {p} outside [0,{self.num_frames})")
        if not self.noise_free and not 0 < self.false_mean < self.true_mean < 1:
            raise TraceFormatError(
                "scenario: need 0 < false_mean < true_mean < 1 (or the noise-free pair 0, 1)")
        if not self.concentration > 0:
            raise TraceFormatError("scenario: concentration must be positive")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) \
                or not 0 <= self.seed < 2 ** 64:
            raise TraceFormatError("scenario: seed must be an unsigned 64-bit integer")
        for p in self.target_props:
            if p not in self.propositions:
                raise TraceFormatError(f"scenario: target proposition {p} is not declared")
        if self.spec:
            parse_formula(self.spec)

    @property
    def noise_free(self) -> bool:
        return self.true_mean == 1.0 and self.false_mean == 0.0

    @classmethod
    def from_dict(cls, doc: Mapping, **overrides) -> "ScenarioScript":
        doc = {**doc, **{k: v for k, v in overrides.items() if v is not None}}
        for key in ("num_frames", "propositions", "truth", "seed"):
            if key not in doc:
                raise TraceFormatError(f"scenario: missing field {key!r}")
        noise = doc.get("noise", {})
        target = doc.get("target", {})
        try:
            truth = tuple((str(p), int(s), int(e)) for p, s, e in doc["truth"])
        except (TypeError, ValueError):
            raise TraceFormatError("scenario: truth entries must be [prop, start, end]") from None
        spans = target.get("spans")
        invs = annotation_from_dict(
            {"video_id": "", "spec": "true", "spans": [],
             "invocations": doc.get("invocations", [])}).invocations
        return cls(
            num_frames=doc["num_frames"],
            propositions=tuple(doc["propositions"]),
            truth=truth,
            seed=doc["seed"],
            true_mean=float(noise.get("true_mean", 0.9)),
            false_mean=float(noise.get("false_mean", 0.1)),
            concentration=float(noise.get("concentration", 20.0)),
            video_id=str(doc.get("video_id", "synthetic")),
            fps=doc.get("fps", 1),
            query=str(doc.get("query", "")),
            spec=str(doc.get("spec", "")),
            target_props=tuple(target.get("props", ())),
            target_spans=None if spans is None else _check_spans(spans, doc["num_frames"], "scenario"),
            invocations=invs,
        )

    def ground_truth(self) -> np.ndarray:
        """Boolean (frames x propositions) truth matrix."""
        truth = np.zeros((self.num_frames, len(self.propositions)), dtype=bool)
        col = {p: i for i, p in enumerate(self.propositions)}
        for p, s, e in self.truth:
            truth[s:e + 1, col[p]] = True
        return truth


def load_scenario(path, **overrides) -> ScenarioScript:
    return ScenarioScript.from_dict(_read_json(path, "scenario"), **overrides)


def _runs(mask: np.ndarray) -> list:
    spans = []
    start = None
    for t, on in enumerate(mask.tolist()):
        if on and start is None:
            start = t
        elif not on and start is not None:
            spans.append((start, t - 1))
            start = None
    if start is not None:
        spans.append((start, len(mask) - 1))
    return spans


def synthesize_trace(s: ScenarioScript) -> tuple[FrameTrace, Annotation]:
    """Sample a trace from a scenario; a pure function of the script and seed."""
    truth = s.ground_truth()
    if s.noise_free:
        conf = truth.astype(np.float64)
    else:
        rng = np.random.default_rng(s.seed)
        mean = np.where(truth, s.true_mean, s.false_mean)
        conf = rng.beta(mean * s.concentration, (1.0 - mean) * s.concentration)
    trace = FrameTrace(s.video_id, s.propositions, conf, s.fps)
    if s.target_spans is not None:
        spans = s.target_spans
    elif s.target_props:
        cols = [s.propositions.index(p) for p in s.target_props]
        spans = tuple(_runs(truth[:, cols].all(axis=1)))
    else:
        spans = ()
    ann = Annotation(s.video_id, s.query, s.spec or "true", spans, s.invocations)
    return trace, ann
