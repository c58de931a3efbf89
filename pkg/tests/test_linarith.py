import math
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from deltaksmt.core import Assignment, LinearAtom, LinearClause, Truth, eval_clauses, linear_atom
from deltaksmt.linarith import (
    Interval,
    IntervalSet,
    PreconditionError,
    backjump_prefix,
    feasible_set,
    implied_bounds,
    pick_value,
    resolvent,
)

F = Fraction
A = Assignment


def C(*atoms):
    return LinearClause(tuple(atoms))


def ge(const, **k):
    return linear_atom(const, ">=", **k)


# ---------------------------------------------------------------------------
# feasible_set


def test_feasible_closed_interval():
    s = feasible_set([C(ge(-1, x=1)), C(ge(3, x=-1))], A(), "x")
    assert s == IntervalSet.closed(1, 3)


def test_feasible_contradictory_strict_bounds():
    s = feasible_set([C(linear_atom(-1, ">", x=1)), C(linear_atom(-1, "<", x=1))], A(), "x")
    assert s.is_empty()


def test_feasible_with_propagated_clause():
    # x >= 1 and (x <= 0 or y >= 5) with y = 0
    cls = [C(ge(-1, x=1)), C(linear_atom(0, "<=", x=1), ge(-5, y=1))]
    assert feasible_set(cls, A([("y", F(0))]), "x").is_empty()


def test_feasible_ignores_clauses_with_other_unassigned_variables():
    cls = [C(ge(-1, x=1)), C(ge(0, x=-1, y=1))]
    assert feasible_set(cls, A(), "x") == IntervalSet([Interval(F(1), None, True, False)])


def test_feasible_rejects_assigned_variable():
    with pytest.raises(PreconditionError):
        feasible_set([C(ge(0, x=1))], A([("x", F(1))]), "x")


def test_implied_bounds_report_source_clause():
    c = C(ge(-3, x=1), ge(0, a=1))
    (b,) = implied_bounds([c], A([("a", F(-1))]), "x")
    assert b.lower and b.value == 3 and not b.strict and b.source == c


# ---------------------------------------------------------------------------
# pick_value


def test_pick_open_unit_interval():
    assert pick_value(IntervalSet([Interval(F(0), F(1), False, False)])) == F(1, 2)


def test_pick_includes_integer_endpoint():
    assert pick_value(IntervalSet.closed(1, 3)) == 1


def test_pick_singleton():
    assert pick_value(IntervalSet.closed(F(2, 3), F(2, 3))) == F(2, 3)


def test_pick_prefers_non_negative_on_ties():
    assert pick_value(IntervalSet.everything()) == 0
    assert pick_value(IntervalSet([Interval(F(-1), F(1), False, False)])) == 0
    assert pick_value(IntervalSet([Interval(None, F(-2), False, False), Interval(F(2), None, False, False)])) == 3


def test_pick_empty_raises():
    with pytest.raises(PreconditionError):
        pick_value(IntervalSet.empty())


def _brute_simplest(lo, hi, lo_closed, hi_closed):
    for den in range(1, 2000):
        cands = []
        for num in range(math.floor(lo * den), math.ceil(hi * den) + 1):
            q = F(num, den)
            if q.denominator != den:
                continue
            if (q > lo or (lo_closed and q == lo)) and (q < hi or (hi_closed and q == hi)):
                cands.append(q)
        if cands:
            return min(cands, key=lambda q: (abs(q.numerator), q < 0))
    return None


@given(st.fractions(min_value=-20, max_value=20, max_denominator=40), st.fractions(min_value=0, max_value=5, max_denominator=40), st.booleans(), st.booleans())
def test_pick_is_simplest_and_in_set(lo, width, lo_closed, hi_closed):
    hi = lo + width
    if width == 0:
        lo_closed = hi_closed = True
    s = IntervalSet([Interval(lo, hi, lo_closed, hi_closed)])
    q = pick_value(s)
    assert s.contains(q)
    assert q == _brute_simplest(lo, hi, lo_closed, hi_closed)
    assert pick_value(s) == q


# ---------------------------------------------------------------------------
# resolvent


def test_resolvent_of_unit_bounds_is_contradiction():
    (c,) = resolvent([C(ge(-3, x=1)), C(ge(1, x=-1))], A(), "x")
    assert c.variables == frozenset()
    assert c.evaluate(A()) is Truth.FALSE


def test_resolvent_eliminates_variable():
    # x >= 3, x <= y with y = 1  ->  y >= 3
    (c,) = resolvent([C(ge(-3, x=1)), C(ge(0, x=-1, y=1))], A([("y", F(1))]), "x")
    assert c.variables == {"y"}
    (a,) = c.atoms
    assert a.evaluate({"y": F(3)}) is Truth.TRUE
    assert a.evaluate({"y": F(3) - F(1, 10**9)}) is Truth.FALSE


def test_resolvent_keeps_false_side_atoms():
    a_atom, b_atom = ge(0, a=1), ge(0, b=1)
    alpha = A([("a", F(-1)), ("b", F(-1))])
    (c,) = resolvent([C(a_atom, ge(-3, x=1)), C(b_atom, ge(1, x=-1))], alpha, "x")
    assert a_atom in c.atoms and b_atom in c.atoms
    assert "x" not in c.variables and c.evaluate(alpha) is Truth.FALSE


def test_resolvent_strict_combination():
    # x > 1 and x <= 1: link atom is strict
    (c,) = resolvent([C(linear_atom(-1, ">", x=1)), C(ge(1, x=-1))], A(), "x")
    assert c.evaluate(A()) is Truth.FALSE


def test_resolvent_precondition():
    with pytest.raises(PreconditionError):
        resolvent([C(ge(-1, x=1))], A(), "x")


_VARS = ("x", "y", "z")
_GRID = [F(i, 4) for i in range(-24, 25)]


def _random_atom(rng, force_x=False):
    vs = ["x"] if force_x and rng.random() < 0.6 else rng.sample(_VARS, rng.randint(1, 2))
    if force_x and "x" not in vs:
        vs.append("x")
    coeffs = {v: F(rng.choice([-3, -2, -1, 1, 2, 3])) for v in vs}
    return LinearAtom.make(F(rng.randint(-6, 6), rng.randint(1, 3)), coeffs, rng.choice([">", ">=", "<", "<="]))


def _random_system(rng):
    cls = []
    for _ in range(rng.randint(2, 6)):
        atoms = [_random_atom(rng, force_x=True)] + [_random_atom(rng) for _ in range(rng.randint(0, 2))]
        cls.append(LinearClause(tuple(atoms)))
    alpha = A()
    for v in rng.sample(["y", "z"], rng.randint(0, 2)):
        alpha = alpha.extend(v, rng.choice(_GRID))
    return cls, alpha


def test_feasible_set_agrees_with_grid_scan():
    rng = random.Random(11)
    grid = [F(i, 8) for i in range(-500, 501)]
    checked = 0
    while checked < 300:
        cls, alpha = _random_system(rng)
        if eval_clauses(cls, alpha) is Truth.FALSE:
            continue
        s = feasible_set(cls, alpha, "x")
        for q in grid:
            assert s.contains(q) == (eval_clauses(cls, alpha.extend("x", q)) is not Truth.FALSE)
        if not s.is_empty():
            assert s.contains(pick_value(s))
        checked += 1


def test_resolvents_are_sound():
    rng = random.Random(5)
    systems = 0
    while systems < 1000:
        cls, alpha = _random_system(rng)
        if eval_clauses(cls, alpha) is Truth.FALSE or not feasible_set(cls, alpha, "x").is_empty():
            continue
        systems += 1
        new = resolvent(cls, alpha, "x")
        assert new
        for c in new:
            assert "x" not in c.variables
            assert c.evaluate(alpha) is Truth.FALSE
            assert not any(c.key() == d.key() for d in cls)
        # implied: true at every sampled model of the system
        for _ in range(40):
            pt = {v: rng.choice(_GRID) for v in _VARS}
            if eval_clauses(cls, pt) is Truth.TRUE:
                assert all(c.evaluate(pt) is Truth.TRUE for c in new), (cls, pt)


# ---------------------------------------------------------------------------
# backjump_prefix


def test_backjump_to_first_variable():
    alpha = A([("x", F(2)), ("y", F(8, 3))])
    # a box-exclusion style clause False at (2, 8/3)
    c = C(linear_atom(-3, ">=", x=1), linear_atom(-3, ">=", y=1))
    assert backjump_prefix([c], alpha) == A([("x", F(2))])


def test_backjump_contradiction_goes_to_empty():
    alpha = A([("x", F(2)), ("y", F(1))])
    assert len(backjump_prefix([C(linear_atom(-1, ">", x=0))], alpha)) == 0
    assert len(backjump_prefix([C(linear_atom(-1, ">", x=0))], A([("x", F(2))]))) == 0


def test_backjump_precondition():
    with pytest.raises(PreconditionError):
        backjump_prefix([C(ge(0, x=1))], A([("x", F(1))]))


@given(st.lists(st.integers(-4, 4), min_size=3, max_size=3), st.integers(-4, 4), st.integers(-4, 4))
def test_backjump_prefix_is_longest_not_false(values, k, c0):
    alpha = A(zip(_VARS, map(F, values)))
    clause = C(linear_atom(c0, ">=", x=1, z=k or 1), linear_atom(c0, ">", y=-1))
    if clause.evaluate(alpha) is not Truth.FALSE:
        return
    g = backjump_prefix([clause], alpha)
    assert clause.evaluate(g) is not Truth.FALSE
    assert clause.evaluate(alpha.prefix(len(g) + 1)) is Truth.FALSE
