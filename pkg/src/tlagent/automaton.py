"""Formula progression and DFA compilation.

States are canonical residual formulas.  A residual is the obligation left on
the remaining frames after a prefix has been read; a state accepts when its
residual holds on the empty suffix.

Progressing ``X f`` or ``N f`` cannot simply return ``f``: the residual must
also remember whether the obligation survives the trace ending right there.
``F true`` holds on any nonempty suffix and fails on the empty one, ``G false``
is the reverse, so

    prog(X f) = f & F true    when f would accept the empty suffix
    prog(N f) = f | G false   when f would reject the empty suffix

and plain ``f`` otherwise.  Without this, ``N q`` on a one-frame trace would
be rejected.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import AlphabetCapError, AutomatonError, StateCapError, UniverseMismatchError
from .formula import (
    FALSE, TRUE, Always, And, Atom, Bottom, BoundedAlways, BoundedEventually, Eventually,
    Formula, Next, Not, Or, Release, Top, Until, WeakNext, rebuild, with_children,
)
from .logic import DEFAULT_EXPANSION_CAP, BooleanTrace, expand_bounds, to_nnf
from .parser import format_formula, parse_formula

__all__ = [
    "Dfa", "conjoin", "disjoin", "canonicalize", "normalize", "progress", "empty_suffix_accepts",
    "compile_dfa", "dfa_accepts", "letter_index", "DEFAULT_STATE_CAP", "DEFAULT_ALPHABET_CAP",
]

DEFAULT_STATE_CAP = 10_000
DEFAULT_ALPHABET_CAP = 16

_NONEMPTY = Eventually(TRUE)
_EMPTY = Always(FALSE)


def _sort_operands(nodes: list) -> list:
    nodes.sort(key=lambda n: n.digest)
    for a, b in zip(nodes, nodes[1:]):
        if a.digest == b.digest:
            # digest collision between distinct formulas: fall back to text
            nodes.sort(key=lambda n: (n.digest, format_formula(n)))
            break
    return nodes


def _flat(cls, operands: Iterable[Formula], unit: Formula, zero: Formula) -> Formula:
    seen = set()
    stack = list(operands)
    while stack:
        g = stack.pop()
        if type(g) is cls:
            stack.append(g.left)
            stack.append(g.right)
        elif g is zero:
            return zero
        elif g is not unit:
            seen.add(g)
    for g in seen:
        if type(g) is Not and g.arg in seen:
            return zero
    if len(seen) > 1:
        seen = _absorb_windows(cls, seen)
    if not seen:
        return unit
    ordered = _sort_operands(list(seen))
    acc = ordered[-1]
    for g in reversed(ordered[:-1]):
        acc = cls(g, acc)
    return acc


def _absorb_windows(cls, operands: set) -> set:
    """Simplify bounded operators sharing an operand.

    In a conjunction, ``F`` windows keep only the innermost (it implies the
    others) and overlapping ``G`` windows merge; a disjunction is the dual.
    """
    groups: dict = {}
    for g in operands:
        if type(g) is BoundedEventually or type(g) is BoundedAlways:
            groups.setdefault((type(g), g.arg), []).append(g)
    if not any(len(v) > 1 for v in groups.values()):
        return operands
    out = set(operands)
    for (kind, arg), nodes in groups.items():
        if len(nodes) < 2:
            continue
        out.difference_update(nodes)
        windows = sorted((n.lo, n.hi) for n in nodes)
        if (kind is BoundedEventually) == (cls is And):
            # keep windows that contain no other window
            kept = [w for w in windows
                    if not any(v != w and w[0] <= v[0] and v[1] <= w[1] for v in windows)]
        else:
            # union of overlapping or adjacent windows
            kept = []
            for lo, hi in windows:
                if kept and lo <= kept[-1][1] + 1:
                    kept[-1] = (kept[-1][0], max(kept[-1][1], hi))
                else:
                    kept.append((lo, hi))
        out.update(kind(lo, hi, arg) for lo, hi in kept)
    return out


def conjoin(*operands: Formula) -> Formula:
    """Canonical n-ary conjunction: flattened, deduplicated, sorted, folded."""
    return _flat(And, operands, TRUE, FALSE)


def disjoin(*operands: Formula) -> Formula:
    """Canonical n-ary disjunction."""
    return _flat(Or, operands, FALSE, TRUE)


def _implies(a: Formula, b: Formula) -> bool:
    """Cheap sufficient test for ``a -> b`` between literals."""
    if a is b:
        return True
    if type(a) is not BoundedEventually and type(a) is not BoundedAlways:
        return False
    cls = type(a)
    if cls is not type(b) or a.arg is not b.arg:
        return False
    if cls is BoundedEventually:
        return b.lo <= a.lo and a.hi <= b.hi
    return a.lo <= b.lo and b.hi <= a.hi


def _subsumes(s: frozenset, t: frozenset) -> bool:
    """Term ``s`` is implied by term ``t`` (so ``t`` is redundant next to ``s``)."""
    return all(any(_implies(y, x) for y in t) for x in s)


def _term(lits) -> frozenset | None:
    lits = set(lits)
    for g in lits:
        if type(g) is Not and g.arg in lits:
            return None
    if len(lits) > 1:
        lits = _absorb_windows(And, lits)
    return frozenset(lits)


def _term_key(t: frozenset):
    return (len(t), sorted(g.digest for g in t))


def _minimize(terms) -> frozenset:
    terms = set(terms)
    if frozenset() in terms:
        return frozenset({frozenset()})
    singles = {next(iter(t)) for t in terms if len(t) == 1}
    for g in singles:
        if type(g) is Not and g.arg in singles:
            return frozenset({frozenset()})
    merged = _absorb_windows(Or, singles) if len(singles) > 1 else singles
    if merged != singles:
        terms = {t for t in terms if len(t) != 1} | {frozenset({g}) for g in merged}
    kept: list = []
    for t in sorted(terms, key=_term_key):
        if any(_subsumes(k, t) for k in kept):
            continue
        kept = [k for k in kept if not _subsumes(t, k)]
        kept.append(t)
    return frozenset(kept)


def _to_dnf(f: Formula) -> frozenset:
    """Boolean skeleton of ``f`` as a minimized set of conjunctive terms over
    its non-boolean subformulas (``FALSE`` is the empty set)."""
    done: dict = {}
    stack = [(f, False)]
    while stack:
        node, expanded = stack.pop()
        if node in done:
            continue
        cls = type(node)
        if cls is not And and cls is not Or:
            if node is TRUE:
                done[node] = frozenset({frozenset()})
            elif node is FALSE:
                done[node] = frozenset()
            else:
                done[node] = frozenset({frozenset({node})})
            continue
        if not expanded:
            stack.append((node, True))
            stack.extend((c, False) for c in node.children if c not in done)
            continue
        a, b = done[node.left], done[node.right]
        if cls is Or:
            done[node] = _minimize(a | b)
        else:
            prod = (_term(x | y) for x in a for y in b)
            done[node] = _minimize(t for t in prod if t is not None)
    return done[f]


_NORMAL: dict = {}


def normalize(f: Formula) -> Formula:
    """Canonical residual: minimized disjunctive normal form of the boolean
    skeleton, with operands in digest order.

    Flattening alone is not enough for progression to terminate: residuals
    such as ``((U & G p) | F q) & G p | F q`` keep growing unless absorption
    (``a | (a & b) = a``) is applied.  Distribution plus subsumption between
    terms makes the set of reachable residuals finite.
    """
    hit = _NORMAL.get(f)
    if hit is not None:
        return hit
    terms = _to_dnf(f)
    r = _flat(Or, (_flat(And, t, TRUE, FALSE) for t in terms), FALSE, TRUE)
    _NORMAL[f] = r
    _NORMAL[r] = r
    return r


def canonicalize(f: Formula) -> Formula:
    def canon(node, kids):
        if type(node) is And:
            return conjoin(*kids)
        if type(node) is Or:
            return disjoin(*kids)
        return with_children(node, kids)
    return normalize(rebuild(f, canon))


def empty_suffix_accepts(f: Formula) -> bool:
    """Whether residual ``f`` is satisfied once no frames remain."""
    return f.empty_accepts


def _check_progressable(f: Formula):
    if not f.is_nnf:
        raise AutomatonError(f"progression needs an NNF formula, got {format_formula(f)}")


class _Progressor:
    """Memoized one-step progression against letters encoded as bitmasks."""

    def __init__(self, propositions: Sequence[str]):
        self.bit = {p: 1 << i for i, p in enumerate(propositions)}
        self.cache: dict = {}

    def __call__(self, f: Formula, letter: int) -> Formula:
        key = (f, letter)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        cls = type(f)
        if cls is Top or cls is Bottom:
            r = f
        elif cls is Atom:
            r = TRUE if letter & self.bit[f.name] else FALSE
        elif cls is Not:
            r = FALSE if letter & self.bit[f.arg.name] else TRUE
        elif cls is And:
            r = conjoin(self(f.left, letter), self(f.right, letter))
        elif cls is Or:
            r = disjoin(self(f.left, letter), self(f.right, letter))
        elif cls is Next:
            r = conjoin(f.arg, _NONEMPTY) if f.arg.empty_accepts else f.arg
        elif cls is WeakNext:
            r = f.arg if f.arg.empty_accepts else disjoin(f.arg, _EMPTY)
        elif cls is Eventually:
            r = disjoin(self(f.arg, letter), f)
        elif cls is Always:
            r = conjoin(self(f.arg, letter), f)
        elif cls is Until:
            r = disjoin(self(f.right, letter), conjoin(self(f.left, letter), f))
        elif cls is Release:
            r = conjoin(self(f.right, letter), disjoin(self(f.left, letter), f))
        elif cls is BoundedEventually:
            if f.lo > 0:
                r = BoundedEventually(f.lo - 1, f.hi - 1, f.arg)
            elif f.hi > 0:
                r = disjoin(self(f.arg, letter), BoundedEventually(0, f.hi - 1, f.arg))
            else:
                r = self(f.arg, letter)
        elif cls is BoundedAlways:
            if f.lo > 0:
                r = BoundedAlways(f.lo - 1, f.hi - 1, f.arg)
            elif f.hi > 0:
                r = conjoin(self(f.arg, letter), BoundedAlways(0, f.hi - 1, f.arg))
            else:
                r = self(f.arg, letter)
        else:
            raise AutomatonError(f"cannot progress {format_formula(f)}")
        self.cache[key] = r
        return r


def progress(f: Formula, assignment: Iterable[str]) -> Formula:
    """Residual obligation of ``f`` after reading one frame.

    ``f`` must be in NNF; the result is canonical.  Bounded operators are
    progressed directly (``F[a,b] g`` becomes ``F[a-1,b-1] g`` or, at
    ``a = 0``, ``prog(g) | F[0,b-1] g``), which agrees with progressing their
    unrolled form.
    """
    _check_progressable(f)
    a = frozenset(assignment)
    props = sorted(f.atoms | a)
    prog = _Progressor(props)
    letter = sum(prog.bit[p] for p in a)
    return normalize(prog(canonicalize(f), letter))


@dataclass(frozen=True, eq=False)
class Dfa:
    """Deterministic automaton over proposition assignments.

    ``delta[q, a]`` is the successor of state ``q`` on the letter whose bit
    ``i`` is proposition ``i`` of ``propositions``.  State 0 is initial.
    ``live[q]`` marks states from which an accepting state is reachable.
    """

    propositions: tuple
    residuals: tuple
    delta: np.ndarray
    accepting: np.ndarray
    live: np.ndarray
    formula: Formula

    @property
    def num_states(self) -> int:
        return len(self.residuals)

    @property
    def num_letters(self) -> int:
        return 1 << len(self.propositions)

    def letter(self, assignment: Iterable[str]) -> int:
        return letter_index(self.propositions, assignment)

    def run(self, letters: Iterable[int], state: int = 0) -> int:
        for a in letters:
            state = int(self.delta[state, a])
        return state

    def state_of(self, residual: Formula) -> int:
        return self.residuals.index(residual)

    def export(self) -> str:
        """Text dump: one ``state`` line per state, then one line per transition."""
        n = len(self.propositions)
        lines = [f"propositions {' '.join(self.propositions)}".rstrip()]
        for q, r in enumerate(self.residuals):
            flag = " accepting" if self.accepting[q] else ""
            lines.append(f"state {q}{flag} residual={format_formula(r)}")
        for q in range(self.num_states):
            for a in range(self.num_letters):
                bits = "".join("1" if a >> i & 1 else "0" for i in range(n))
                lines.append(f"{q} --{bits}--> {int(self.delta[q, a])}")
        return "\n".join(lines) + "\n"


def letter_index(propositions: Sequence[str], assignment: Iterable[str]) -> int:
    index = {p: i for i, p in enumerate(propositions)}
    a = 0
    for p in assignment:
        if p in index:
            a |= 1 << index[p]
    return a


def compile_dfa(f, state_cap: int = DEFAULT_STATE_CAP, propositions: Sequence[str] | None = None,
                alphabet_cap: int = DEFAULT_ALPHABET_CAP,
                expansion_cap: int = DEFAULT_EXPANSION_CAP, bounds: str = "native") -> Dfa:
    """Compile a formula (or formula string) to a DFA by progression.

    The formula is converted to NNF first.  With ``bounds="expand"`` bounded
    operators are unrolled into next-chains before progression; the default
    ``"native"`` progresses them as window counters, which yields the same
    language with far fewer states for long deadlines.  States are explored
    breadth-first over every letter; exceeding ``state_cap`` raises
    StateCapError rather than truncating.
    """
    if isinstance(f, str):
        f = parse_formula(f)
    if state_cap < 2:
        raise AutomatonError("state_cap must be at least 2")
    if propositions is None:
        props = tuple(sorted(f.atoms))
    else:
        props = tuple(propositions)
        missing = f.atoms - set(props)
        if missing:
            raise UniverseMismatchError(f"propositions {sorted(missing)} missing from universe")
        if len(set(props)) != len(props):
            raise AutomatonError("duplicate propositions in universe")
    if len(props) > alphabet_cap:
        raise AlphabetCapError(f"{len(props)} propositions exceed the alphabet cap of {alphabet_cap}")

    if bounds == "expand":
        start = canonicalize(expand_bounds(to_nnf(f), expansion_cap))
    elif bounds == "native":
        start = canonicalize(to_nnf(f))
    else:
        raise AutomatonError(f"unknown bounds mode {bounds!r}")
    prog = _Progressor(props)
    n_letters = 1 << len(props)
    ids = {start: 0}
    residuals = [start]
    rows = []
    queue = deque([start])
    while queue:
        r = queue.popleft()
        row = []
        for a in range(n_letters):
            nxt = normalize(prog(r, a))
            q = ids.get(nxt)
            if q is None:
                if len(residuals) >= state_cap:
                    raise StateCapError(
                        f"state cap of {state_cap} exceeded while compiling {format_formula(f)}")
                q = ids[nxt] = len(residuals)
                residuals.append(nxt)
                queue.append(nxt)
            row.append(q)
        rows.append(row)

    delta = np.array(rows, dtype=np.int32).reshape(len(residuals), n_letters)
    accepting = np.array([r.empty_accepts for r in residuals], dtype=bool)
    live = _live_states(delta, accepting)
    for arr in (delta, accepting, live):
        arr.flags.writeable = False
    return Dfa(props, tuple(residuals), delta, accepting, live, f)


def _live_states(delta: np.ndarray, accepting: np.ndarray) -> np.ndarray:
    preds: list = [set() for _ in range(len(accepting))]
    for q, row in enumerate(delta):
        for s in set(row.tolist()):
            preds[s].add(q)
    live = accepting.copy()
    stack = [int(q) for q in np.flatnonzero(accepting)]
    while stack:
        s = stack.pop()
        for q in preds[s]:
            if not live[q]:
                live[q] = True
                stack.append(q)
    return live


def dfa_accepts(d: Dfa, w: BooleanTrace) -> bool:
    """Run ``d`` over ``w`` and report whether it ends in an accepting state."""
    missing = set(d.propositions) - set(w.propositions)
    if missing:
        raise UniverseMismatchError(f"trace lacks propositions {sorted(missing)}")
    q = d.run(d.letter(a) for a in w.frames)
    return bool(d.accepting[q])
