"""Normalization and the reference finite-trace semantics (an iterative truth table per subformula)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import ExpansionLimitError, FormulaError
from .formula import (
    FALSE, TRUE, Always, And, Atom, Bottom, BoundedAlways, BoundedEventually,
    Eventually, Formula, Implies, Next, Not, Or, Release, Top, Until, WeakNext,
    iter_postorder, rebuild, with_children,
)

__all__ = ["BooleanTrace", "to_nnf", "expand_bounds", "evaluate_trace", "DEFAULT_EXPANSION_CAP"]

DEFAULT_EXPANSION_CAP = 10_000


@dataclass(frozen=True)
class BooleanTrace:
    """Thresholded view of a video: the set of true propositions per frame."""

    propositions: tuple
    frames: tuple

    def __init__(self, propositions: Iterable[str], frames: Iterable[Iterable[str]]):
        props = tuple(propositions)
        frs = tuple(frozenset(a) for a in frames)
        if not frs:
            raise FormulaError("a boolean trace needs at least one frame")
        universe = set(props)
        for t, a in enumerate(frs):
            extra = a - universe
            if extra:
                raise FormulaError(f"frame {t} mentions undeclared propositions {sorted(extra)}")
        object.__setattr__(self, "propositions", props)
        object.__setattr__(self, "frames", frs)

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    def window(self, start: int, end: int) -> "BooleanTrace":
        """Inclusive sub-trace ``start..end``."""
        return BooleanTrace(self.propositions, self.frames[start:end + 1])


_NNF_DUAL = {
    And: Or, Or: And, Next: WeakNext, WeakNext: Next, Eventually: Always, Always: Eventually,
    Until: Release, Release: Until, BoundedEventually: BoundedAlways,
    BoundedAlways: BoundedEventually,
}


def to_nnf(f: Formula) -> Formula:
    """Push negations to atoms and eliminate implications."""
    cache: dict = {}

    def go(node: Formula, neg: bool) -> Formula:
        key = (node, neg)
        hit = cache.get(key)
        if hit is not None:
            return hit
        cls = type(node)
        if cls is Top:
            out = FALSE if neg else TRUE
        elif cls is Bottom:
            out = TRUE if neg else FALSE
        elif cls is Atom:
            out = Not(node) if neg else node
        elif cls is Not:
            out = go(node.arg, not neg)
        elif cls is Implies:
            # a -> b  ==  !a | b
            a, b = go(node.left, not neg), go(node.right, neg)
            out = And(a, b) if neg else Or(a, b)
        elif cls in (And, Or, Until, Release):
            out = (_NNF_DUAL[cls] if neg else cls)(go(node.left, neg), go(node.right, neg))
        elif cls in (Next, WeakNext, Eventually, Always):
            out = (_NNF_DUAL[cls] if neg else cls)(go(node.arg, neg))
        elif cls in (BoundedEventually, BoundedAlways):
            out = (_NNF_DUAL[cls] if neg else cls)(node.lo, node.hi, go(node.arg, neg))
        else:  # pragma: no cover
            raise TypeError(f"unknown formula node {node!r}")
        cache[key] = out
        return out

    return go(f, False)


def expand_bounds(f: Formula, cap: int = DEFAULT_EXPANSION_CAP) -> Formula:
    """Unroll bounded operators into Next/WeakNext chains.

    ``F[a,b] g`` uses strong next (the window must exist) and ``G[a,b] g``
    weak next (an early end of trace does not violate it).
    """

    def expand(node: Formula, kids: tuple) -> Formula:
        if isinstance(node, (BoundedEventually, BoundedAlways)):
            if node.hi - node.lo > cap or node.hi > cap:
                raise ExpansionLimitError(
                    f"bound expansion of [{node.lo},{node.hi}] exceeds the cap of {cap} frames")
            body = kids[0]
            if isinstance(node, BoundedEventually):
                acc = body
                for _ in range(node.hi - node.lo):
                    acc = Or(body, Next(acc))
                for _ in range(node.lo):
                    acc = Next(acc)
            else:
                acc = body
                for _ in range(node.hi - node.lo):
                    acc = And(body, WeakNext(acc))
                for _ in range(node.lo):
                    acc = WeakNext(acc)
            return acc
        return with_children(node, kids)

    if not f.has_bounds:
        return f
    return rebuild(f, expand)


def evaluate_trace(f: Formula, w: BooleanTrace, i: int = 0) -> bool:
    """Decide ``w, i |= f`` directly from the finite-trace semantics.

    Bounded operators are interpreted natively (F strong, G weak at the end of
    the trace), which makes this function the oracle for ``expand_bounds`` too.
    No automaton is involved: every subformula gets a truth vector over all
    positions, filled from its operator's quantifier definition, children
    before parents (so formula depth is not limited by the Python stack).
    """
    T = len(w)
    if not 0 <= i < T:
        raise FormulaError(f"position {i} out of range for a trace of {T} frames")
    sat: dict = {}
    span = range(T)
    for node in iter_postorder(f):
        cls = type(node)
        if cls is Top:
            v = [True] * T
        elif cls is Bottom:
            v = [False] * T
        elif cls is Atom:
            v = [node.name in w.frames[k] for k in span]
        elif cls is Not:
            a = sat[node.arg]
            v = [not a[k] for k in span]
        elif cls in (And, Or, Implies):
            a, b = sat[node.left], sat[node.right]
            if cls is And:
                v = [a[k] and b[k] for k in span]
            elif cls is Or:
                v = [a[k] or b[k] for k in span]
            else:
                v = [(not a[k]) or b[k] for k in span]
        elif cls is Next:
            a = sat[node.arg]
            v = [k + 1 < T and a[k + 1] for k in span]
        elif cls is WeakNext:
            a = sat[node.arg]
            v = [k + 1 >= T or a[k + 1] for k in span]
        elif cls is Eventually:
            a = sat[node.arg]
            v = [any(a[j] for j in range(k, T)) for k in span]
        elif cls is Always:
            a = sat[node.arg]
            v = [all(a[j] for j in range(k, T)) for k in span]
        elif cls is Until:
            a, b = sat[node.left], sat[node.right]
            v = [any(b[j] and all(a[m] for m in range(k, j)) for j in range(k, T))
                 for k in span]
        elif cls is Release:
            # f R g  ==  !(!f U !g)
            a, b = sat[node.left], sat[node.right]
            v = [all(b[j] or any(a[m] for m in range(k, j)) for j in range(k, T))
                 for k in span]
        elif cls is BoundedEventually:
            a = sat[node.arg]
            v = [any(a[j] for j in range(k + node.lo, min(k + node.hi, T - 1) + 1))
                 for k in span]
        elif cls is BoundedAlways:
            a = sat[node.arg]
            v = [all(a[j] for j in range(k + node.lo, min(k + node.hi, T - 1) + 1))
                 for k in span]
        else:  # pragma: no cover
            raise TypeError(f"unknown formula node {node!r}")
        sat[node] = v
    return sat[f][i]
