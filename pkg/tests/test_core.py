import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltaksmt.core import (
    Assignment,
    Dyadic,
    LinearAtom,
    LinearClause,
    NonlinConstraint,
    SolverState,
    Status,
    Truth,
    affine_form,
    const,
    eval_atom,
    eval_clause,
    eval_clauses,
    eval_exact,
    format_rational,
    func,
    is_polynomial,
    linear_atom,
    var,
)

F = Fraction
x, y = var("x"), var("y")

rationals = st.fractions(max_denominator=10**6).filter(lambda q: abs(q) < 10**6)


def test_atom_true_under_assignment():
    assert eval_atom(linear_atom(-1, ">=", x=1), Assignment([("x", F(2))])) is Truth.TRUE


def test_atom_unknown_when_unassigned():
    assert eval_atom(linear_atom(-1, ">=", x=1), Assignment()) is Truth.UNKNOWN


def test_atom_worked_example_point():
    # x/4 + 1 - y <= 0 at x = 2, y = 8/3
    a = LinearAtom.make(1, {"x": F(1, 4), "y": -1}, "<=")
    assert eval_atom(a, Assignment([("x", F(2)), ("y", F(8, 3))])) is Truth.TRUE


def test_clause_true_unknown():
    c = LinearClause.of(LinearAtom.make(-1, {"x": 1}, "<="), LinearAtom.make(-2, {"y": 1}, ">="))
    assert eval_clause(c, Assignment([("x", F(0))])) is Truth.TRUE
    assert eval_clause(c, Assignment([("x", F(2))])) is Truth.UNKNOWN


def test_clause_worked_example_point():
    c = LinearClause.of(
        LinearAtom.make(F(-12, 19), {"x": 1}, "<="),
        LinearAtom.make(F(-19, 12), {"y": 1}, "<="),
    )
    assert eval_clause(c, Assignment([("x", F(2)), ("y", F(84, 55))])) is Truth.TRUE


def test_clause_false_when_all_atoms_false():
    c = LinearClause.of(LinearAtom.make(-1, {"x": 1}, ">"), LinearAtom.make(0, {"x": -1}, ">"))
    assert eval_clause(c, Assignment([("x", F(0))])) is Truth.FALSE
    assert eval_clauses([c], Assignment([("x", F(0))])) is Truth.FALSE


def test_atom_drops_zero_coefficients_and_sorts():
    a = LinearAtom.make(3, {"y": 2, "x": 0, "a": 1})
    assert a.coefficients == (("a", F(1)), ("y", F(2)))
    assert a.variables == ("a", "y")


def test_atom_rejects_bad_relation_and_duplicates():
    with pytest.raises(ValueError):
        LinearAtom.make(0, {"x": 1}, "~")
    with pytest.raises(ValueError):
        LinearAtom(F(0), (("x", F(1)), ("x", F(2))), ">=")


def test_clause_deduplicates_and_needs_an_atom():
    a = linear_atom(1, ">=", x=1)
    assert len(LinearClause.of(a, a).atoms) == 1
    with pytest.raises(ValueError):
        LinearClause(())


def test_negative_coefficient_threshold():
    # -2x + 1 > 0  iff  x < 1/2
    a = LinearAtom.make(1, {"x": -2}, ">")
    assert a.evaluate({"x": F(0)}) is Truth.TRUE
    assert a.evaluate({"x": F(1, 2)}) is Truth.FALSE


def test_normalized_relations():
    a = LinearAtom.make(1, {"x": 1}, "<")
    (n,) = a.normalized()
    assert n.relation == ">" and n.constant == -1 and n.coefficients == (("x", F(-1)),)
    assert len(LinearAtom.make(1, {"x": 1}, "=").normalized()) == 2


def test_json_round_trip():
    c = LinearClause.of(LinearAtom.make(F(-3, 7), {"x": F(2, 3), "y": -1}, ">"), linear_atom(1, ">=", z=1))
    assert LinearClause.from_json(c.to_json()) == c


def test_assignment_trail_and_prefix():
    a = Assignment().extend("x", 1).extend("y", F(1, 2))
    assert a.trail == (("x", F(1)), ("y", F(1, 2)))
    assert a.prefix(1).as_dict() == {"x": F(1)}
    assert len(a.prefix(0)) == 0
    with pytest.raises(ValueError):
        a.extend("x", 2)


def test_floats_are_rejected():
    with pytest.raises(TypeError):
        Assignment().extend("x", 0.5)


def test_nonlinear_constraint_relation_and_variables():
    c = NonlinConstraint(func("sin", x) * y, ">")
    assert c.variables == ("x", "y")
    with pytest.raises(ValueError):
        NonlinConstraint(x, "<")


def test_state_linear_part_only_grows():
    c1 = LinearClause.of(linear_atom(0, ">=", x=1))
    c2 = LinearClause.of(linear_atom(1, ">=", x=-1))
    s = SolverState.initial([c1, c1], [])
    assert len(s.linear) == 1
    s2 = s.with_clauses([c2])
    assert s2.linear[:1] == s.linear and s2.contains(c2)
    with pytest.raises(ValueError):
        s2.with_clauses([c2])
    assert s2.with_status(Status.UNSAT).linear == s2.linear


def test_affine_form_and_polynomial_recognition():
    assert affine_form(const(2) * x - y / 4 + 1) == (F(1), {"x": F(2), "y": F(-1, 4)})
    assert affine_form(x * y) is None
    assert is_polynomial(x * x - 2 * y)
    assert not is_polynomial(func("exp", x))
    assert not is_polynomial(1 / x)


def test_eval_exact():
    assert eval_exact(x * x - y / 3, {"x": F(1, 2), "y": F(3)}) == F(-3, 4)


def test_format_rational():
    assert format_rational(F(-6, 4)) == "-3/2"
    assert format_rational(F(5)) == "5"


def test_rational_arithmetic_is_exact():
    rng = random.Random(1)
    for _ in range(100_000):
        a = F(rng.randint(-10**9, 10**9), rng.randint(1, 10**9))
        b = F(rng.randint(-10**9, 10**9), rng.randint(1, 10**9))
        assert (a + b) - b == a


@given(st.integers(), st.integers(min_value=-200, max_value=200))
def test_dyadic_round_trip(m, e):
    d = Dyadic(m, e)
    assert d.mantissa == 0 or d.mantissa % 2 == 1
    assert Dyadic.from_fraction(d.to_fraction()) == d
    assert d.to_fraction() == F(m) * F(2) ** e


@given(st.integers(), st.integers(min_value=-60, max_value=60), st.integers(), st.integers(min_value=-60, max_value=60))
def test_dyadic_arithmetic_matches_rationals(m1, e1, m2, e2):
    a, b = Dyadic(m1, e1), Dyadic(m2, e2)
    fa, fb = a.to_fraction(), b.to_fraction()
    assert (a + b).to_fraction() == fa + fb
    assert (a - b).to_fraction() == fa - fb
    assert (a * b).to_fraction() == fa * fb
    assert (a < b) == (fa < fb)


def test_dyadic_rejects_non_dyadic():
    with pytest.raises(ValueError):
        Dyadic.from_fraction(F(1, 3))


_rels = st.sampled_from(["<", "<=", ">", ">=", "=", "!="])
_vars = ["x", "y", "z"]


@st.composite
def clauses(draw):
    atoms = []
    for _ in range(draw(st.integers(1, 3))):
        vs = draw(st.lists(st.sampled_from(_vars), min_size=0, max_size=3, unique=True))
        coeffs = {v: draw(st.integers(-3, 3)) for v in vs}
        atoms.append(LinearAtom.make(draw(st.integers(-4, 4)), coeffs, draw(_rels)))
    return LinearClause(tuple(atoms))


@given(clauses(), st.permutations(_vars), st.lists(st.integers(-3, 3), min_size=3, max_size=3), st.integers(0, 3))
@settings(max_examples=300)
def test_clause_evaluation_is_monotone_under_extension(c, order, values, k):
    full = Assignment(zip(order, map(F, values)))
    partial = full.prefix(k)
    before = c.evaluate(partial)
    if before is not Truth.UNKNOWN:
        for n in range(k, 4):
            assert c.evaluate(full.prefix(n)) is before
