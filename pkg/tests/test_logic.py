import random

import pytest

from tlagent import formula as F
from tlagent.errors import ExpansionLimitError, FormulaError
from tlagent.logic import BooleanTrace, evaluate_trace, expand_bounds, to_nnf
from tlagent.parser import parse_formula

from _gen import random_boolean_trace, random_formula


def direct(f, w, i):
    """Textbook finite-trace semantics with quantifiers spelled out."""
    T = len(w)
    k = type(f)
    if k is F.Top:
        return True
    if k is F.Bottom:
        return False
    if k is F.Atom:
        return f.name in w[i]
    if k is F.Not:
        return not direct(f.arg, w, i)
    if k is F.And:
        return direct(f.left, w, i) and direct(f.right, w, i)
    if k is F.Or:
        return direct(f.left, w, i) or direct(f.right, w, i)
    if k is F.Implies:
        return (not direct(f.left, w, i)) or direct(f.right, w, i)
    if k is F.Next:
        return i + 1 < T and direct(f.arg, w, i + 1)
    if k is F.WeakNext:
        return i + 1 >= T or direct(f.arg, w, i + 1)
    if k is F.Eventually:
        return any(direct(f.arg, w, j) for j in range(i, T))
    if k is F.Always:
        return all(direct(f.arg, w, j) for j in range(i, T))
    if k is F.Until:
        return any(direct(f.right, w, j) and all(direct(f.left, w, m) for m in range(i, j))
                   for j in range(i, T))
    if k is F.Release:
        return all(direct(f.right, w, j) or any(direct(f.left, w, m) for m in range(i, j))
                   for j in range(i, T))
    if k is F.BoundedEventually:
        return any(direct(f.arg, w, j) for j in range(i + f.lo, min(T, i + f.hi + 1)))
    if k is F.BoundedAlways:
        return all(direct(f.arg, w, j) for j in range(i + f.lo, min(T, i + f.hi + 1)))
    raise AssertionError(k)


def tr(*frames, props=("p", "q", "r")):
    return BooleanTrace(props, [set(x) for x in frames])


@pytest.mark.parametrize("text, trace, expected", [
    ("F p", tr(set(), {"p"}), True),
    ("X p", tr({"p"}), False),
    ("N p", tr({"p"}), True),
    ("p U q", tr({"p"}, {"p"}, {"q"}), True),
    ("p U q", tr({"p"}, set(), {"q"}), False),
    ("G p", tr({"p"}, {"p"}), True),
    ("p R q", tr({"q"}, {"q"}), True),
    ("F[1,2] p", tr({"p"}, set()), False),
    ("F[1,2] p", tr(set(), set(), {"p"}), True),
    ("F[3,4] p", tr({"p"}, {"p"}), False),
    ("G[1,5] p", tr(set(), {"p"}), True),
    ("G[3,4] p", tr(set()), True),
])
def test_evaluate_examples(text, trace, expected):
    assert evaluate_trace(parse_formula(text), trace, 0) is expected


def test_evaluate_position_out_of_range():
    with pytest.raises(FormulaError):
        evaluate_trace(parse_formula("p"), tr({"p"}), 1)
    with pytest.raises(FormulaError):
        evaluate_trace(parse_formula("p"), tr({"p"}), -1)


def test_empty_trace_rejected():
    with pytest.raises(FormulaError):
        BooleanTrace(("p",), [])
    with pytest.raises(FormulaError):
        BooleanTrace(("p",), [{"q"}])


@pytest.mark.parametrize("text, expected", [
    ("!(p & q)", "!p | !q"),
    ("!F p", "G !p"),
    ("!(p U q)", "!p R !q"),
    ("!(p R q)", "!p U !q"),
    ("!X p", "N !p"),
    ("!N p", "X !p"),
    ("p -> q", "!p | q"),
    ("!F[1,3] p", "G[1,3] !p"),
    ("!G[0,2] p", "F[0,2] !p"),
    ("!!p", "p"),
])
def test_nnf_examples(text, expected):
    assert to_nnf(parse_formula(text)) is parse_formula(expected)


def _is_nnf(f):
    for node in F.iter_postorder(f):
        if isinstance(node, F.Implies):
            return False
        if isinstance(node, F.Not) and not isinstance(node.arg, F.Atom):
            return False
    return True


@pytest.mark.parametrize("text, expected", [
    ("F[0,0] p", "p"),
    ("F[0,2] p", "p | X (p | X p)"),
    ("G[0,1] p", "p & N p"),
    ("G[0,0] p", "p"),
    ("F[2,2] p", "X X p"),
    ("G[1,1] p", "N p"),
])
def test_expand_examples(text, expected):
    assert expand_bounds(parse_formula(text)) is parse_formula(expected)


def test_expansion_cap():
    with pytest.raises(ExpansionLimitError):
        expand_bounds(parse_formula("F[0,20001] p"))
    with pytest.raises(ExpansionLimitError):
        expand_bounds(parse_formula("F[0,20] p"), cap=10)


def test_nnf_soundness_seeded():
    rng = random.Random(11)
    atoms = ["p", "q", "r"]
    for _ in range(1000):
        f = random_formula(rng, atoms[:rng.randint(1, 3)], rng.randint(0, 4))
        w = random_boolean_trace(rng, atoms, rng.randint(1, 6))
        g = to_nnf(f)
        assert _is_nnf(g)
        assert evaluate_trace(f, w, 0) == evaluate_trace(g, w, 0)


def test_evaluator_matches_textbook_semantics():
    rng = random.Random(12)
    for _ in range(1000):
        f = random_formula(rng, ["p", "q"], rng.randint(0, 4))
        w = random_boolean_trace(rng, ["p", "q"], rng.randint(1, 6))
        i = rng.randrange(len(w))
        assert evaluate_trace(f, w, i) == direct(f, w, i)


def test_bound_expansion_soundness():
    rng = random.Random(13)
    for _ in range(1000):
        f = random_formula(rng, ["p", "q"], rng.randint(1, 3))
        w = random_boolean_trace(rng, ["p", "q"], rng.randint(1, 6))
        e = expand_bounds(f)
        assert not any(isinstance(n, (F.BoundedEventually, F.BoundedAlways))
                       for n in F.iter_postorder(e))
        assert direct(f, w, 0) == evaluate_trace(e, w, 0)


def test_duality_at_every_position():
    rng = random.Random(14)
    for _ in range(500):
        f = random_formula(rng, ["p", "q"], rng.randint(0, 4))
        w = random_boolean_trace(rng, ["p", "q"], rng.randint(1, 5))
        for i in range(len(w)):
            assert evaluate_trace(F.Not(f), w, i) == (not evaluate_trace(f, w, i))


def test_deep_formula_evaluates():
    f = parse_formula("X " * 2000 + "p")
    w = BooleanTrace(("p",), [set()] * 2000 + [{"p"}])
    assert evaluate_trace(f, w, 0)
