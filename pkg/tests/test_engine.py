import json
from fractions import Fraction
from pathlib import Path

import pytest

from deltaksmt.core import Assignment, Status, Truth, eval_clauses
from deltaksmt.engine import (
    RULES,
    Context,
    Limits,
    compute_moduli,
    exact_check,
    initial_state,
    packing_bound_holds,
    read_trace,
    replay,
    solve,
    step,
)
from deltaksmt.frontend import bounds_analysis, load
from deltaksmt.linearise import Strategy
from deltaksmt.oracle import certify_delta_model, certify_model

F = Fraction
CORPUS = Path(__file__).resolve().parent.parent / "corpus"
MODES = list(Strategy)

CIRCLE_NARROW = """
(declare-const x Real)(declare-const y Real)
(assert (<= 0.9 x 1))(assert (<= 0.9 y 1))
(assert (<= (+ (* x x) (* y y)) 1))
(assert (>= (+ x y) 1.9))
"""


def _solve(text, delta, mode=Strategy.LOCAL, **limits):
    _, sf = load(text)
    return sf, solve(sf, F(delta), mode, Limits(**limits) if limits else None)


def _check_invariants(sf, r, delta):
    # every rule name is known and steps are numbered in order
    assert [ev["step"] for ev in r.trace] == list(range(len(r.trace)))
    assert all(ev.rule in RULES for ev in r.trace)
    # the linear part only grows and never repeats a clause
    keys = [c.key() for c in r.state.linear]
    assert len(keys) == len(set(keys))
    assert r.state.linear[: len(sf.linear)] == initial_state(sf).linear
    # the trace reproduces the final state
    final = replay(sf, read_trace(ev.to_json() for ev in r.trace))
    assert final == r.state
    if r.status is Status.UNSAT:
        assert any(c.evaluate(Assignment()) is Truth.FALSE for c in r.state.linear)
    if r.status is Status.DELTA_SAT:
        assert certify_delta_model(sf, delta, r.model)
    if r.status is Status.SAT:
        assert certify_model(sf, r.model)
    assert packing_bound_holds(sf, r)


# ---------------------------------------------------------------------------
# step


def test_contradictory_bounds_step_by_step():
    _, sf = load("(declare-const x Real)(assert (>= x 1))(assert (<= x 0))")
    ctx = Context(sf.variables, F(1, 100))
    s, ev = step(initial_state(sf), ctx, 0)
    assert ev.rule == "R"
    (clause,) = ev["clauses"]
    assert all(not a["coeffs"] for a in clause)
    s, ev = step(s, ctx, 1)
    assert ev.rule == "FUNSAT" and s.status is Status.UNSAT


def test_conflict_backjumps_before_failing():
    _, sf = load("(declare-const x Real)(declare-const y Real)(assert (<= 0 x 1))(assert (<= 0 y 1))(assert (>= (- y x) 2))")
    r = solve(sf, F(1, 10))
    rules = [ev.rule for ev in r.trace]
    assert rules[0] == "A" and "R" in rules and rules[-1] == "FUNSAT"
    assert r.status is Status.UNSAT


def test_step_rejects_terminal_state():
    _, sf = load("(declare-const x Real)(assert (>= x 1))(assert (<= x 0))")
    ctx = Context(sf.variables, F(1, 100))
    with pytest.raises(ValueError):
        step(initial_state(sf).with_status(Status.UNSAT), ctx)


# ---------------------------------------------------------------------------
# solve


@pytest.mark.parametrize("mode", MODES)
def test_worked_example_is_unsat(mode):
    sf, r = _solve((CORPUS / "worked_example.smt2").read_text(), F(1, 100), mode)
    assert r.status is Status.UNSAT and r.steps <= 5000
    _check_invariants(sf, r, F(1, 100))


@pytest.mark.parametrize("mode", MODES)
def test_sin_on_unit_interval_is_delta_sat(mode):
    sf, r = _solve("(declare-const x Real)(assert (<= 0 x 1))(assert (>= (sin x) 0))", F(1, 100), mode)
    assert r.status is Status.DELTA_SAT
    assert certify_delta_model(sf, F(1, 100), r.model)
    _check_invariants(sf, r, F(1, 100))


def test_linear_instance_is_sat_at_simplest_value():
    sf, r = _solve("(declare-const x Real)(assert (>= x 1))(assert (<= x 3))", F(1, 100))
    assert r.status is Status.SAT and r.model == {"x": F(1)}
    assert [ev.rule for ev in r.trace] == ["A", "FSAT"]


@pytest.mark.parametrize("mode", MODES)
def test_narrow_circle_is_unsat(mode):
    sf, r = _solve(CIRCLE_NARROW, F(1, 2), mode)
    assert r.status is Status.UNSAT
    assert r.rule_counts()["L"] > 0
    _check_invariants(sf, r, F(1, 2))


def test_coarse_circle_is_delta_sat():
    text = CIRCLE_NARROW.replace("0.9", "0.5").replace("1.9", "1.5")
    sf, r = _solve(text, F(1, 2), Strategy.FULL_BOX)
    assert r.status is Status.DELTA_SAT
    assert certify_delta_model(sf, F(1, 2), r.model)


def test_polynomial_exact_model():
    sf, r = _solve("(declare-const x Real)(assert (<= 0 x 1))(assert (= (* 4 x x) 1))", F(1, 100))
    assert r.status is Status.SAT and r.model["x"] == F(1, 2)
    assert exact_check(sf.nonlinear, Assignment([("x", F(1, 2))]))


def test_transcendental_never_claims_exact_sat():
    sf, r = _solve("(declare-const x Real)(assert (<= 0 x 0))(assert (>= (sin x) 0))", F(1, 100))
    assert r.status is Status.DELTA_SAT


@pytest.mark.parametrize("mode", MODES)
def test_fresh_variables_and_disjunction(mode):
    sf, r = _solve((CORPUS / "disj_sin.smt2").read_text(), F(1, 4), mode)
    assert r.status is Status.DELTA_SAT
    assert certify_delta_model(sf, F(1, 4), r.model)
    _check_invariants(sf, r, F(1, 4))


def test_selector_encoding_is_solved():
    conj = " ".join(f"(and (>= x {i}) (<= y {-i}))" for i in range(1, 5))
    text = f"(declare-const x Real)(declare-const y Real)(assert (<= -8 x 8))(assert (<= -8 y 8))(assert (or {conj}))(assert (>= x 3.5))"
    sf, r = _solve(text, F(1, 10))
    assert r.status is Status.SAT
    x, y = r.model["x"], r.model["y"]
    assert x >= F(7, 2) and any(x >= i and y <= -i for i in range(1, 5))
    _check_invariants(sf, r, F(1, 10))


def test_step_limit_gives_resource_out():
    sf, r = _solve((CORPUS / "tanh_like.smt2").read_text(), F(1, 8), Strategy.LOCAL, max_steps=20)
    assert r.status is Status.RESOURCE_OUT and r.steps == 20
    assert "step limit" in r.note


def test_unbounded_instance_is_flagged():
    sf, r = _solve("(declare-const x Real)(assert (>= x 0))(assert (>= (sin x) 2))", F(1, 2), max_steps=200)
    assert r.status is Status.RESOURCE_OUT
    assert "unbounded" in r.note and not bounds_analysis(sf).bounded


def test_domain_violation_gives_unknown():
    sf, r = _solve("(declare-const x Real)(assert (<= -1 x 1))(assert (>= (log x) 0))", F(1, 2))
    assert r.status is Status.UNKNOWN and r.steps == 0
    assert "not defined" in r.note


def test_full_box_without_modulus_falls_back_to_local():
    # sqrt has an unbounded derivative at 0
    text = "(declare-const x Real)(assert (<= 0 x 1))(assert (>= (sqrt x) 2))"
    _, sf = load(text)
    assert compute_moduli(sf, bounds_analysis(sf))[0] is None
    r = solve(sf, F(1, 2), Strategy.FULL_BOX)
    assert r.status is Status.UNSAT
    lins = r.linearisations()
    assert lins and all(ev.get("fallback") for ev in lins)


def test_zero_delta_is_rejected():
    _, sf = load("(declare-const x Real)(assert (>= x 0))")
    with pytest.raises(ValueError):
        solve(sf, 0)


@pytest.mark.parametrize("mode", MODES)
def test_runs_are_deterministic(mode):
    text = (CORPUS / "sqrt2_delta.smt2").read_text()
    runs = [_solve(text, F(1, 64), mode)[1] for _ in range(2)]
    assert [e.to_json() for e in runs[0].trace] == [e.to_json() for e in runs[1].trace]


def test_trace_keys_are_ordered():
    _, r = _solve((CORPUS / "sqrt2_delta.smt2").read_text(), F(1, 64))
    for ev in r.trace:
        keys = list(json.loads(ev.to_json()))
        assert keys[:2] == ["step", "rule"]
        if ev.rule == "L":
            assert keys[2:6] == ["constraint", "center", "eps", "strategy"]


def test_on_event_sees_every_step():
    _, sf = load((CORPUS / "exp_sat.smt2").read_text())
    seen = []
    r = solve(sf, F(1, 16), on_event=seen.append)
    assert seen == r.trace


def test_delta_sat_model_satisfies_linear_part():
    sf, r = _solve((CORPUS / "mixed_sat.smt2").read_text(), F(1, 4))
    assert r.status is Status.DELTA_SAT
    assert eval_clauses(sf.linear, r.model) is Truth.TRUE
