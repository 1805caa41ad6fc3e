import pickle
import random

import pytest
from hypothesis import given, settings, strategies as st

from tlagent.errors import BoundError, FormulaError, FormulaSyntaxError
from tlagent.formula import (FALSE, TRUE, Always, And, Atom, BoundedAlways, BoundedEventually,
                             Eventually, Implies, Next, Not, Or, Release, Until, WeakNext)
from tlagent.parser import MAX_NESTING, format_formula, parse_formula, tokenize

from _gen import random_formula

p, q, r = Atom("p"), Atom("q"), Atom("r")


@pytest.mark.parametrize("text, expected", [
    ("F person", Eventually(Atom("person"))),
    ("p U (q & r)", Until(p, And(q, r))),
    ("G (door_open -> F[0,1200] door_closed)",
     Always(Implies(Atom("door_open"), BoundedEventually(0, 1200, Atom("door_closed"))))),
    ("true", TRUE),
    ("false | p", Or(FALSE, p)),
    ("N X p", WeakNext(Next(p))),
    ("G[2,5] !p", BoundedAlways(2, 5, Not(p))),
])
def test_parse_examples(text, expected):
    assert parse_formula(text) is expected


@pytest.mark.parametrize("text, expected", [
    # unary binds tighter than U/R, which bind tighter than &, then |, then ->
    ("!p & q", And(Not(p), q)),
    ("F p U q", Until(Eventually(p), q)),
    ("p U q & r", And(Until(p, q), r)),
    ("p & q | r", Or(And(p, q), r)),
    ("p | q -> r", Implies(Or(p, q), r)),
    ("p U q U r", Until(p, Until(q, r))),
    ("p R q U r", Release(p, Until(q, r))),
    ("p -> q -> r", Implies(p, Implies(q, r))),
    ("p & q & r", And(And(p, q), r)),
    ("!(p | q)", Not(Or(p, q))),
])
def test_precedence_and_associativity(text, expected):
    assert parse_formula(text) is expected


def test_whitespace_is_insignificant():
    assert parse_formula("G(p->F[0,3]q)") is parse_formula(" G ( p -> F [ 0 , 3 ] q ) ")


def test_atom_names_are_case_sensitive():
    assert parse_formula("Person") is not parse_formula("person")
    assert parse_formula("car_2") is Atom("car_2")


@pytest.mark.parametrize("text, pos", [
    ("F (", 3),
    ("p &", 3),
    ("p q", 2),
    ("(p", 2),
    ("p U", 3),
    ("", 0),
    ("F[1 p", 4),
])
def test_syntax_errors_report_position(text, pos):
    with pytest.raises(FormulaSyntaxError) as info:
        parse_formula(text)
    assert info.value.position == pos
    assert info.value.expected


def test_lexical_error_position():
    with pytest.raises(FormulaSyntaxError) as info:
        parse_formula("p & $q")
    assert info.value.position == 4


def test_expected_set_lists_operand_starts():
    with pytest.raises(FormulaSyntaxError) as info:
        parse_formula("F (")
    assert {"atom", "'('", "'!'"} <= info.value.expected


def test_trailing_input_is_rejected():
    with pytest.raises(FormulaSyntaxError) as info:
        parse_formula("p) ")
    assert info.value.position == 1


def test_bound_error():
    with pytest.raises(BoundError):
        parse_formula("F[3,1] p")
    with pytest.raises(BoundError):
        BoundedEventually(3, 1, p)
    with pytest.raises(BoundError):
        BoundedAlways(-1, 1, p)


def test_reserved_words_are_not_atoms():
    for word in ("X", "N", "F", "G", "U", "R"):
        with pytest.raises(FormulaError):
            Atom(word)
    with pytest.raises(FormulaError):
        Atom("a-b")
    with pytest.raises(FormulaError):
        Atom("")


def test_format_examples():
    assert format_formula(Eventually(p)) == "F p"
    assert format_formula(And(p, q)) == "p & q"
    assert format_formula(Eventually(And(p, q))) == "F (p & q)"
    assert parse_formula(format_formula(parse_formula("G (a -> F b)"))) is parse_formula("G (a -> F b)")


def test_tokenize_positions():
    toks = tokenize("F[0,12] p")
    assert [(t.text, t.pos) for t in toks][:6] == [("F", 0), ("[", 1), ("0", 2), (",", 3),
                                                   ("12", 4), ("]", 6)]


def test_round_trip_seeded():
    rng = random.Random(7)
    atoms = ["a", "b", "c"]
    for _ in range(1000):
        f = random_formula(rng, atoms, rng.randint(0, 5))
        assert parse_formula(format_formula(f)) is f


@st.composite
def formulas(draw, depth=4):
    seed = draw(st.integers(0, 2 ** 32 - 1))
    d = draw(st.integers(0, depth))
    return random_formula(random.Random(seed), ["p", "q", "door_open"], d)


@settings(max_examples=200, deadline=None)
@given(formulas())
def test_round_trip_property(f):
    assert parse_formula(format_formula(f)) is f


def test_hash_consing_and_pickle():
    f = parse_formula("G (p -> F[0,3] q)")
    assert f is parse_formula("G(p -> F[0,3] q)")
    assert pickle.loads(pickle.dumps(f)) is f
    assert f.atoms == frozenset({"p", "q"})


def test_long_chains_do_not_overflow():
    f = parse_formula("!" * 5000 + "p")
    # "! p" then "! (...)" around it 4999 times
    assert len(format_formula(f)) == 3 + 4 * 4999
    g = parse_formula(" U ".join(["p"] * 3000))
    assert isinstance(g, Until)
    h = parse_formula(" -> ".join(["p"] * 3000))
    assert isinstance(h, Implies)


def test_nesting_limit_is_a_syntax_error():
    with pytest.raises(FormulaSyntaxError):
        parse_formula("(" * (MAX_NESTING + 1) + "p" + ")" * (MAX_NESTING + 1))
    assert parse_formula("(" * MAX_NESTING + "p" + ")" * MAX_NESTING) is p
