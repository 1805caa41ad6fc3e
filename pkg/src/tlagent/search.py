"""Span extraction (offline) and match-event monitoring (online).

A *minimal span* starts at frame ``i`` and ends at the first frame ``j``
where the sub-trace ``i..j`` satisfies the formula, provided frame
``i`` is relevant: replacing its letter by some other assignment would make
the same window fail.  Without the relevance test every idle frame before an
event would open its own span (``F x`` is satisfied by any window that ends
on an ``x``), and clips would stretch back to the start of the video.
Minimal spans that overlap or touch are merged into clips.

The online monitor keeps one DFA run per recent start frame and applies the
same rule, so its merged events equal the offline clips.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .automaton import Dfa, compile_dfa
from .errors import SearchError, UniverseMismatchError
from .logic import BooleanTrace
from .parser import parse_formula
from .probability import assignment_probabilities, satisfaction_probability
from .traces import FrameTrace

__all__ = [
    "SearchConfig", "SpanResult", "MatchEvent", "Monitor", "threshold_trace", "minimal_spans",
    "merge_spans", "find_spans", "monitor_step",
]


@dataclass(frozen=True)
class SearchConfig:
    mode: str = "boolean"
    tau: float = 0.5
    rho: float = 0.5
    max_window: int = 600
    suppression: str = "span"

    def __post_init__(self):
        if self.mode not in ("boolean", "probabilistic"):
            raise SearchError(f"unknown search mode {self.mode!r}")
        if not 0.0 <= self.tau <= 1.0 or not 0.0 <= self.rho <= 1.0:
            raise SearchError("tau and rho must lie in [0,1]")
        if isinstance(self.max_window, bool) or not isinstance(self.max_window, int) \
                or self.max_window < 1:
            raise SearchError(f"max window must be a positive integer, got {self.max_window!r}")
        if self.suppression not in ("none", "span"):
            raise SearchError(f"unknown suppression policy {self.suppression!r}")


@dataclass(frozen=True)
class SpanResult:
    start: int
    end: int
    probability: float
    mode: str = "boolean"

    def to_record(self) -> dict:
        return {"start": self.start, "end": self.end, "probability": self.probability}


@dataclass(frozen=True)
class MatchEvent:
    start: int
    end: int
    spec_id: str = ""

    @property
    def frame(self) -> int:
        return self.end

    @property
    def span(self) -> tuple:
        return (self.start, self.end)

    def to_record(self) -> dict:
        return {"spec": self.spec_id, "start": self.start, "end": self.end, "frame": self.end}


def threshold_trace(tr: FrameTrace, tau: float) -> BooleanTrace:
    """Boolean view of a trace; ties at ``tau`` count as true."""
    return tr.threshold(tau)


def _as_dfa(f) -> Dfa:
    if isinstance(f, Dfa):
        return f
    if isinstance(f, str):
        f = parse_formula(f)
    return compile_dfa(f)


def _masks(d: Dfa):
    return (np.ascontiguousarray(d.accepting, dtype=np.uint8),
            np.ascontiguousarray(d.live, dtype=np.uint8))


def minimal_spans(f, tr: FrameTrace, cfg: SearchConfig = SearchConfig()) -> list[tuple]:
    """Relevant minimal spans ``(start, end)`` before merging."""
    d = _as_dfa(f)
    if len(tr) < 1:
        raise SearchError("empty trace")
    accepting, live = _masks(d)
    if cfg.mode == "boolean":
        conf = tr.columns(d.propositions)
        bits = (conf >= cfg.tau).astype(np.int64) << np.arange(len(d.propositions))
        letters = np.ascontiguousarray(bits.sum(axis=1), dtype=np.int32)
        starts, ends = kernels.boolean_spans(d.delta, accepting, live, 0, letters, cfg.max_window)
    else:
        probs = np.ascontiguousarray(assignment_probabilities(tr.columns(d.propositions)))
        starts, ends, _ = kernels.prob_spans(d.delta, accepting, live, 0, probs,
                                             cfg.max_window, cfg.rho)
    return list(zip(starts.tolist(), ends.tolist()))


def merge_spans(spans) -> list[tuple]:
    """Merge overlapping or adjacent inclusive intervals."""
    merged: list = []
    for s, e in sorted(spans):
        if merged and s <= merged[-1][1] + 1:
            if e > merged[-1][1]:
                merged[-1] = (merged[-1][0], e)
        else:
            merged.append((s, e))
    return merged


def find_spans(f, tr: FrameTrace, cfg: SearchConfig = SearchConfig()) -> list[SpanResult]:
    """Clips satisfying the formula, sorted and pairwise disjoint.

    Each clip reports the satisfaction probability of the formula over
    exactly the clip's frames.
    """
    d = _as_dfa(f)
    clips = merge_spans(minimal_spans(d, tr, cfg))
    return [SpanResult(s, e, satisfaction_probability(d, tr.window(s, e)), cfg.mode)
            for s, e in clips]


class Monitor:
    """Online matcher over a stream of frame confidences (boolean mode).

    One run is kept per start frame among the last ``max_window`` frames.
    Each run carries the set of states reachable had its first frame shown a
    different letter; a run that accepts is reported only if one of those
    alternatives rejects (frame relevance, as in ``minimal_spans``).

    With ``suppression="span"`` an emitted span cancels the runs that started
    inside it, and later spans that overlap or touch the last reported clip
    extend it silently instead of raising a second alert.
    """

    def __init__(self, spec, tau: float = 0.5, max_window: int = 600,
                 suppression: str = "span", spec_id: str | None = None):
        cfg = SearchConfig("boolean", tau=tau, max_window=max_window, suppression=suppression)
        self.dfa = _as_dfa(spec)
        self.tau = cfg.tau
        self.max_window = cfg.max_window
        self.suppression = cfg.suppression
        self.spec_id = spec_id if spec_id is not None else (spec if isinstance(spec, str) else "")
        self.frame = -1
        self.runs: deque = deque()  # [start, state, alternatives]
        self.clip_end = -2
        self.no_start_until = 0
        d = self.dfa
        self._alts0 = frozenset(d.delta[0].tolist())

    @property
    def propositions(self) -> tuple:
        return self.dfa.propositions

    def _letter(self, fc) -> int:
        a = 0
        for i, p in enumerate(self.dfa.propositions):
            try:
                c = fc[p]
            except KeyError:
                raise UniverseMismatchError(f"frame {self.frame + 1} lacks proposition {p}") from None
            if c >= self.tau:
                a |= 1 << i
        return a

    def step(self, fc: Mapping[str, float]) -> list[MatchEvent]:
        """Consume one frame; return the match events it completes."""
        letter = self._letter(fc)
        self.frame += 1
        t = self.frame
        d = self.dfa
        delta, accepting, live = d.delta, d.accepting, d.live
        while self.runs and t - self.runs[0][0] >= self.max_window:
            self.runs.popleft()
        if t >= self.no_start_until:
            self.runs.append([t, 0, self._alts0])

        completed = []
        survivors = deque()
        for run in self.runs:
            start, q, alts = run
            q = int(delta[q, letter])
            if start < t:
                alts = frozenset(int(delta[s, letter]) for s in alts)
            else:
                alts = alts - {q}
            if accepting[q]:
                if any(not accepting[s] for s in alts):
                    completed.append(start)
                continue
            if not live[q]:
                continue
            run[1], run[2] = q, alts
            survivors.append(run)
        self.runs = survivors

        events = []
        for start in completed:
            if self.suppression == "none":
                events.append(MatchEvent(start, t, self.spec_id))
                continue
            if start <= self.clip_end + 1:
                self.clip_end = max(self.clip_end, t)
            else:
                events.append(MatchEvent(start, t, self.spec_id))
                self.clip_end = t
            self.runs = deque(r for r in self.runs if not start <= r[0] <= t)
            self.no_start_until = t + 1
        return events


def monitor_step(state: Monitor, fc: Mapping[str, float]) -> tuple[Monitor, list[MatchEvent]]:
    """Functional spelling of ``Monitor.step``; the monitor is advanced in place."""
    return state, state.step(fc)
