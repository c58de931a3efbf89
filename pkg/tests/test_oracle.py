from fractions import Fraction
from pathlib import Path

import pytest

from deltaksmt.core import const, func, sub, var
from deltaksmt.frontend import bounds_analysis, load
from deltaksmt.oracle import (
    OracleResult,
    agreement,
    bp_decide,
    certify_constraint,
    certify_delta_model,
    certify_model,
    find_exact_point,
    script_truth,
)

F = Fraction
x = var("x")
CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def test_certify_constraint_decides_signs():
    assert certify_constraint(sub(func("sin", x), const(0)), ">=", {"x": F(1)}) is True
    _, sf = load("(declare-const x Real)(assert (>= (* x x) 2))")
    (c,) = sf.nonlinear
    assert certify_constraint(c.term, c.relation, {"x": F(3, 2)}) is True
    assert certify_constraint(c.term, c.relation, {"x": F(7, 5)}) is False


def test_certify_constraint_undecided_at_transcendental_zero():
    assert certify_constraint(func("sin", x), ">", {"x": F(0)}) is None


def test_delta_model_versus_exact_model():
    _, sf = load("(declare-const x Real)(assert (<= 0 x 2))(assert (= (* x x) 2))")
    q = F(141, 100)
    assert certify_delta_model(sf, F(1, 10), {"x": q})
    assert not certify_model(sf, {"x": q})
    assert not certify_delta_model(sf, F(1, 1000), {"x": q})


def test_script_truth_three_valued():
    script, _ = load("(declare-const x Real)(assert (>= (sin x) 0))(assert (<= x 1))")
    assert script_truth(script, {"x": F(1)}) is True
    assert script_truth(script, {"x": F(2)}) is False
    assert script_truth(script, {"x": F(0)}) is None


def test_find_exact_point():
    script, _ = load("(declare-const x Real)(assert (<= 0 x 1))(assert (> (exp x) 2))")
    pt = find_exact_point(script, {"x": (F(0), F(1))}, n=200)
    assert pt is not None and pt["x"] > F(69, 100)


def test_bp_contradictory_bounds_at_root():
    _, sf = load("(declare-const x Real)(assert (>= x 1))(assert (<= x 0))")
    r = bp_decide(sf, F(1, 100))
    assert r.status == "unsat" and r.nodes == 1


def test_bp_sin_is_delta_sat():
    _, sf = load("(declare-const x Real)(assert (<= 0 x 1))(assert (>= (sin x) 0))")
    r = bp_decide(sf, F(1, 100))
    assert r.status == "delta-sat"
    assert certify_delta_model(sf, F(1, 100), r.model)


def test_bp_worked_example_is_unsat():
    _, sf = load((CORPUS / "worked_example.smt2").read_text())
    assert bp_decide(sf, F(1, 100)).status == "unsat"


def test_bp_unbounded_is_unknown():
    _, sf = load("(declare-const x Real)(assert (>= x 0))(assert (>= (sin x) 2))")
    assert bp_decide(sf, F(1, 2)).status == "unknown"


def test_bp_node_budget():
    # the solution set is a single point, so bisection never certifies nor prunes
    _, sf = load("(declare-const x Real)(assert (<= 0 x 2))(assert (= (* x x) 2))")
    assert bp_decide(sf, F(1, 10**30), max_depth=60, max_nodes=50).status == "unknown"


def test_bp_fresh_variables_get_witness_values():
    script, sf = load((CORPUS / "disj_sin.smt2").read_text())
    r = bp_decide(sf, F(1, 4))
    assert r.status == "delta-sat"
    assert all(fv.name in r.model for fv in sf.fresh_vars)


def _header(text, key):
    return next(l.split(":", 1)[1].strip() for l in text.splitlines() if l.startswith(f"; {key}:"))


_UNSAT = [p for p in sorted(CORPUS.glob("*.smt2")) if "unsat" in _header(p.read_text(), "expected").split("|")]


@pytest.mark.parametrize("path", _UNSAT, ids=lambda p: p.stem)
def test_bp_unsat_has_no_exact_sample(path):
    text = path.read_text()
    script, sf = load(text)
    assert bp_decide(sf, F(_header(text, "delta"))).status == "unsat"
    box = {v: bounds_analysis(sf).domain_box[v] for v in script.variables}
    if any(b is None or b[0] > b[1] for b in box.values()):
        return  # the bounds alone are contradictory
    assert find_exact_point(script, box, n=10_000) is None


# ---------------------------------------------------------------------------
# agreement


@pytest.fixture
def sin_instance():
    return load("(declare-const x Real)(assert (<= 0 x 1))(assert (>= (sin x) (/ 1 2)))")


def test_agreement_accepts_certified_delta_model(sin_instance):
    script, sf = sin_instance
    ok, _ = agreement(sf, F(1, 10), "delta-sat", {"x": F(1)}, OracleResult("unknown"), script)
    assert ok


def test_agreement_rejects_bad_model(sin_instance):
    script, sf = sin_instance
    ok, why = agreement(sf, F(1, 10), "delta-sat", {"x": F(0)}, OracleResult("unknown"), script)
    assert not ok and "model" in why


def test_agreement_rejects_unsat_against_true_witness(sin_instance):
    script, sf = sin_instance
    ok, _ = agreement(sf, F(1, 10), "unsat", None, OracleResult("delta-sat", {"x": F(1)}), script)
    assert not ok


def test_agreement_accepts_unsat_in_weakened_band():
    script, sf = load("(declare-const x Real)(assert (<= 0 x 1))(assert (>= (sin x) 0.9))")
    # sin(1) < 0.9 but within the weakening
    ok, why = agreement(sf, F(1, 10), "unsat", None, OracleResult("delta-sat", {"x": F(1)}), script)
    assert ok and "weakened" in why


def test_agreement_sat_against_unsat_reference():
    script, sf = load("(declare-const x Real)(assert (<= 0 x 1))(assert (= (* 4 x x) 1))")
    ok, _ = agreement(sf, F(1, 10), "sat", {"x": F(1, 2)}, OracleResult("unsat"), script)
    assert not ok
    ok, _ = agreement(sf, F(1, 10), "sat", {"x": F(1, 2)}, OracleResult("delta-sat"), script)
    assert ok
