"""Abstract syntax of finite-trace temporal formulas.

Nodes are hash-consed: constructing a node that is structurally equal to an
existing one returns the existing object.  Structural equality is therefore
identity, hashing is O(1), and deep formulas produced by bound expansion share
their repeated subterms.  Each node caches a few bottom-up facts (a stable
structural digest, its atoms, whether it is in NNF, whether it holds on the
empty suffix) at construction time, so none of them need recursion later.
"""

from __future__ import annotations

import hashlib
import re
from typing import Callable, ClassVar, Iterator

from .errors import BoundError, FormulaError

__all__ = [
    "Formula", "Top", "Bottom", "Atom", "Not", "And", "Or", "Implies",
    "Next", "WeakNext", "Eventually", "Always", "Until", "Release",
    "BoundedEventually", "BoundedAlways", "TRUE", "FALSE", "RESERVED_WORDS",
    "iter_postorder", "rebuild",
]

ATOM_PATTERN = re.compile(r"[A-Za-z0-9_]+\Z")
RESERVED_WORDS = frozenset({"X", "N", "F", "G", "U", "R", "true", "false"})

# (class, args) -> node.  Insertions go through dict.setdefault, which is
# atomic under the GIL, so concurrent construction is safe.
_INTERN: dict = {}


class Formula:
    __slots__ = ("_args", "digest", "atoms", "is_nnf", "has_bounds", "empty_accepts",
                 "__weakref__")

    kind: ClassVar[str] = "Formula"
    arity: ClassVar[int] = 0

    def __new__(cls, *args):
        args = cls._validate(args)
        key = (cls, args)
        node = _INTERN.get(key)
        if node is None:
            node = object.__new__(cls)
            node._args = args
            node._summarize()
            node = _INTERN.setdefault(key, node)
        return node

    @classmethod
    def _validate(cls, args):
        if len(args) != cls.arity:
            raise TypeError(f"{cls.__name__} takes {cls.arity} operand(s), got {len(args)}")
        for a in args:
            if not isinstance(a, Formula):
                raise TypeError(f"{cls.__name__} operands must be formulas, got {a!r}")
        return tuple(args)

    def _summarize(self):
        kids = self.children
        h = hashlib.blake2b(digest_size=8)
        h.update(self.kind.encode())
        for part in self._payload():
            h.update(b"\x00" + str(part).encode())
        for k in kids:
            h.update(b"\x01" + k.digest)
        self.digest = h.digest()
        if not kids:
            self.atoms = frozenset()
        elif len(kids) == 1 or kids[0].atoms is kids[1].atoms:
            self.atoms = kids[0].atoms
        else:
            self.atoms = kids[0].atoms | kids[1].atoms
        self.is_nnf = all(k.is_nnf for k in kids)
        self.has_bounds = any(k.has_bounds for k in kids)
        self.empty_accepts = False

    def _payload(self):
        return ()

    @property
    def children(self) -> tuple:
        return tuple(a for a in self._args if isinstance(a, Formula))

    # Interned nodes are their own copies.
    def __copy__(self):
        return self

    def __deepcopy__(self, memo):
        return self

    def __reduce__(self):
        return (type(self), self._args)

    def __repr__(self):
        inner = ", ".join(repr(a) for a in self._args)
        return f"{type(self).__name__}({inner})"

    def __str__(self):
        from .parser import format_formula
        return format_formula(self)


class Top(Formula):
    __slots__ = ()
    kind = "True"

    def _summarize(self):
        super()._summarize()
        self.empty_accepts = True


class Bottom(Formula):
    __slots__ = ()
    kind = "False"


class Atom(Formula):
    __slots__ = ()
    kind = "Atom"
    arity = 1

    @classmethod
    def _validate(cls, args):
        if len(args) != 1 or not isinstance(args[0], str):
            raise TypeError("Atom takes a single name")
        name = args[0]
        if not ATOM_PATTERN.match(name):
            raise FormulaError(f"invalid atom name {name!r}")
        if name in RESERVED_WORDS:
            raise FormulaError(f"atom name {name!r} is a reserved word")
        return (name,)

    def _summarize(self):
        super()._summarize()
        self.atoms = frozenset(self._args)

    def _payload(self):
        return self._args

    @property
    def name(self) -> str:
        return self._args[0]

    @property
    def children(self):
        return ()


class _Unary(Formula):
    __slots__ = ()
    arity = 1

    @property
    def arg(self) -> Formula:
        return self._args[0]


class _Binary(Formula):
    __slots__ = ()
    arity = 2

    @property
    def left(self) -> Formula:
        return self._args[0]

    @property
    def right(self) -> Formula:
        return self._args[1]


class Not(_Unary):
    __slots__ = ()
    kind = "Not"

    def _summarize(self):
        super()._summarize()
        self.is_nnf = isinstance(self.arg, Atom)
        self.empty_accepts = not self.arg.empty_accepts if not self.is_nnf else False


class And(_Binary):
    __slots__ = ()
    kind = "And"

    def _summarize(self):
        super()._summarize()
        self.empty_accepts = self.left.empty_accepts and self.right.empty_accepts


class Or(_Binary):
    __slots__ = ()
    kind = "Or"

    def _summarize(self):
        super()._summarize()
        self.empty_accepts = self.left.empty_accepts or self.right.empty_accepts


class Implies(_Binary):
    __slots__ = ()
    kind = "Implies"

    def _summarize(self):
        super()._summarize()
        self.is_nnf = False
        self.empty_accepts = (not self.left.empty_accepts) or self.right.empty_accepts


class Next(_Unary):
    """Strong next: requires a successor frame."""
    __slots__ = ()
    kind = "Next"


class WeakNext(_Unary):
    """Weak next: vacuously true on the last frame."""
    __slots__ = ()
    kind = "WeakNext"

    def _summarize(self):
        super()._summarize()
        self.empty_accepts = True


class Eventually(_Unary):
    __slots__ = ()
    kind = "Eventually"


class Always(_Unary):
    __slots__ = ()
    kind = "Always"

    def _summarize(self):
        super()._summarize()
        self.empty_accepts = True


class Until(_Binary):
    __slots__ = ()
    kind = "Until"


class Release(_Binary):
    __slots__ = ()
    kind = "Release"

    def _summarize(self):
        super()._summarize()
        self.empty_accepts = True


class _Bounded(Formula):
    __slots__ = ()
    arity = 3

    @classmethod
    def _validate(cls, args):
        if len(args) != 3:
            raise TypeError(f"{cls.__name__}(lo, hi, arg)")
        lo, hi, arg = args
        for b in (lo, hi):
            if isinstance(b, bool) or not isinstance(b, int):
                raise TypeError(f"bounds must be integers, got {b!r}")
        if lo < 0:
            raise BoundError(f"bound error: lower bound must be >= 0, got {lo}")
        if lo > hi:
            raise BoundError(f"bound error: lower bound {lo} exceeds upper bound {hi}")
        if not isinstance(arg, Formula):
            raise TypeError(f"{cls.__name__} operand must be a formula")
        return (lo, hi, arg)

    def _summarize(self):
        super()._summarize()
        self.has_bounds = True

    def _payload(self):
        return self._args[:2]

    @property
    def lo(self) -> int:
        return self._args[0]

    @property
    def hi(self) -> int:
        return self._args[1]

    @property
    def arg(self) -> Formula:
        return self._args[2]


class BoundedEventually(_Bounded):
    __slots__ = ()
    kind = "BoundedEventually"


class BoundedAlways(_Bounded):
    __slots__ = ()
    kind = "BoundedAlways"

    def _summarize(self):
        super()._summarize()
        self.empty_accepts = True


TRUE = Top()
FALSE = Bottom()


def iter_postorder(f: Formula) -> Iterator[Formula]:
    """Yield each distinct subformula once, children before parents."""
    seen = set()
    stack = [(f, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            yield node
            continue
        if node in seen:
            continue
        seen.add(node)
        stack.append((node, True))
        for child in reversed(node.children):
            if child not in seen:
                stack.append((child, False))


def rebuild(f: Formula, fn: Callable[[Formula, tuple], Formula]) -> Formula:
    """Bottom-up rewrite without Python recursion.

    ``fn(node, new_children)`` returns the replacement for ``node`` given the
    already rewritten children.  Shared subterms are rewritten once.
    """
    done: dict = {}
    for node in iter_postorder(f):
        done[node] = fn(node, tuple(done[c] for c in node.children))
    return done[f]


def with_children(node: Formula, kids: tuple) -> Formula:
    """Rebuild ``node`` with replacement children, keeping its payload."""
    if kids == node.children:
        return node
    if isinstance(node, _Bounded):
        return type(node)(node.lo, node.hi, kids[0])
    return type(node)(*kids)
