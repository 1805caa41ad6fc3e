"""Satisfaction probability of a formula over a probabilistic trace.

Propositions are treated as independent Bernoulli variables, across
propositions and across frames, with the per-frame confidences as their
means.  Under that model the forward pass over the DFA is exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .automaton import Dfa, compile_dfa
from .errors import OracleSizeError, UniverseMismatchError
from .formula import Formula
from .logic import BooleanTrace, evaluate_trace
from .parser import format_formula, parse_formula
from .traces import FrameTrace

__all__ = [
    "frame_distribution", "assignment_probabilities", "state_distribution",
    "satisfaction_probability", "brute_force_probability", "neusv_score", "ScoreResult",
    "BRUTE_FORCE_MAX_PROPS", "BRUTE_FORCE_MAX_FRAMES",
]

BRUTE_FORCE_MAX_PROPS = 4
BRUTE_FORCE_MAX_FRAMES = 8
BRUTE_FORCE_MAX_TRACES = 1 << 22


def frame_distribution(fc: Mapping[str, float], propositions: Sequence[str] | None = None):
    """Probability of every assignment for one frame, by letter index.

    Returns a list of ``(assignment, probability)``; bit ``i`` of the list
    position is proposition ``i`` of ``propositions`` (default: ``fc`` order).
    """
    props = list(fc) if propositions is None else list(propositions)
    row = np.array([[fc[p] for p in props]], dtype=np.float64)
    probs = assignment_probabilities(row)[0]
    out = []
    for a, pr in enumerate(probs.tolist()):
        out.append((frozenset(p for i, p in enumerate(props) if a >> i & 1), pr))
    return out


def assignment_probabilities(conf: np.ndarray) -> np.ndarray:
    """(frames x props) confidences to (frames x 2**props) letter probabilities."""
    conf = np.asarray(conf, dtype=np.float64)
    T, n = conf.shape
    letters = np.arange(1 << n)
    probs = np.ones((T, 1 << n))
    for i in range(n):
        on = (letters >> i) & 1
        probs *= np.where(on, conf[:, i:i + 1], 1.0 - conf[:, i:i + 1])
    return probs


def _letter_table(d: Dfa, tr: FrameTrace) -> np.ndarray:
    return np.ascontiguousarray(assignment_probabilities(tr.columns(d.propositions)))


def state_distribution(d: Dfa, tr: FrameTrace) -> tuple[np.ndarray, np.ndarray]:
    """Final DFA state distribution and the total mass after each frame."""
    if len(tr) < 1:
        raise UniverseMismatchError("empty trace")
    return kernels.forward(d.delta, 0, _letter_table(d, tr))


def satisfaction_probability(d: Dfa, tr: FrameTrace) -> float:
    """Probability that a random boolean trace drawn from ``tr`` is accepted."""
    dist, _ = state_distribution(d, tr)
    p = float(dist[d.accepting].sum())
    return min(1.0, max(0.0, p))


def brute_force_probability(f, tr: FrameTrace) -> float:
    """Enumerate every boolean trace and sum the weights of satisfying ones.

    Independent of the automaton: satisfaction is decided by the direct
    semantics.  Only for tiny inputs.
    """
    if isinstance(f, str):
        f = parse_formula(f)
    props = sorted(f.atoms)
    T = len(tr)
    if len(props) > BRUTE_FORCE_MAX_PROPS or T > BRUTE_FORCE_MAX_FRAMES:
        raise OracleSizeError(
            f"brute force limited to {BRUTE_FORCE_MAX_PROPS} propositions and "
            f"{BRUTE_FORCE_MAX_FRAMES} frames (got {len(props)}, {T})")
    if (1 << len(props)) ** T > BRUTE_FORCE_MAX_TRACES:
        raise OracleSizeError(f"brute force would enumerate {(1 << len(props)) ** T} traces")
    conf = tr.columns(props)
    letters = [frozenset(p for i, p in enumerate(props) if a >> i & 1)
               for a in range(1 << len(props))]
    weights = [[1.0] * len(letters) for _ in range(T)]
    for t in range(T):
        for a, letter in enumerate(letters):
            w = 1.0
            for i, p in enumerate(props):
                w *= conf[t, i] if p in letter else 1.0 - conf[t, i]
            weights[t][a] = w
    total = 0.0
    for word in itertools.product(range(len(letters)), repeat=T):
        w = 1.0
        for t, a in enumerate(word):
            w *= weights[t][a]
        if w == 0.0:
            continue
        if evaluate_trace(f, BooleanTrace(props, [letters[a] for a in word]), 0):
            total += w
    return total


@dataclass(frozen=True)
class ScoreResult:
    video_id: str
    spec: str
    probability: float
    frames: int
    propositions: tuple

    def to_record(self) -> dict:
        return {"video_id": self.video_id, "spec": self.spec, "probability": self.probability,
                "frames": self.frames, "propositions": list(self.propositions)}


def neusv_score(f, tr: FrameTrace, dfa: Dfa | None = None) -> ScoreResult:
    """Temporal-fidelity score: the whole-trace satisfaction probability."""
    if isinstance(f, str):
        spec, f = f, parse_formula(f)
    else:
        spec = format_formula(f)
    d = dfa if dfa is not None else compile_dfa(f)
    p = satisfaction_probability(d, tr)
    return ScoreResult(tr.video_id, spec, p, len(tr), d.propositions)
