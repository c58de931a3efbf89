"""Reference decider and model certifiers for differential testing.

The branch-and-prune search here shares only the term model and interval
enclosures with the solver; bounds, pruning and witnesses are computed
independently.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional

from .core import (
    LinearAtom,
    LinearClause,
    NonlinConstraint,
    Term,
    Truth,
    add,
    as_fraction,
    const,
    eval_clauses,
    eval_exact,
    is_polynomial,
)
from .realeval import DomainError, certify_sign, enclose_fractions

CERTIFY_PRECISIONS = (64, 160, 400)


# ---------------------------------------------------------------------------
# Certifiers


def certify_constraint(term: Term, relation: str, point: Mapping[str, Fraction]) -> Optional[bool]:
    """Decide ``term(point) <relation> 0``; exact for polynomials."""
    if is_polynomial(term):
        try:
            v = eval_exact(term, point)
        except ZeroDivisionError:
            return False
        return v > 0 if relation == ">" else v >= 0
    for w in CERTIFY_PRECISIONS:
        r = certify_sign(term, point, relation, w)
        if r is not None:
            return r
    return None


def certify_delta_model(sf, delta, model: Mapping[str, Fraction]) -> bool:
    """True iff ``model`` provably satisfies the δ-weakening of ``sf``.

    Linear clauses are checked exactly; each nonlinear ``f ⋄ 0`` is checked
    as ``f + δ ⋄ 0`` by interval evaluation.  Disequality constraints weaken
    to True.
    """
    delta = as_fraction(delta)
    if eval_clauses(sf.linear, model) is not Truth.TRUE:
        return False
    for c in sf.nonlinear:
        if c.origin == "ne":
            continue
        if certify_constraint(add(c.term, const(delta)), c.relation, model) is not True:
            return False
    return True


def certify_model(sf, model: Mapping[str, Fraction]) -> bool:
    """True iff ``model`` provably satisfies ``sf`` itself."""
    if eval_clauses(sf.linear, model) is not Truth.TRUE:
        return False
    return all(certify_constraint(c.term, c.relation, model) is True for c in sf.nonlinear)


def formula_truth(f, point: Mapping[str, Fraction]) -> Optional[bool]:
    """Truth of an input formula (parsed, not separated) at a point."""
    from .frontend import And, Atom, BoolConst, Not, Or

    if isinstance(f, BoolConst):
        return f.value
    if isinstance(f, Not):
        r = formula_truth(f.arg, point)
        return None if r is None else not r
    if isinstance(f, (And, Or)):
        vals = [formula_truth(a, point) for a in f.args]
        if isinstance(f, And):
            if False in vals:
                return False
            return None if None in vals else True
        if True in vals:
            return True
        return None if None in vals else False
    assert isinstance(f, Atom)
    t, rel = f.term, f.relation
    if rel in (">", ">="):
        return certify_constraint(t, rel, point)
    if rel in ("<", "<="):
        return certify_constraint(-t, ">" if rel == "<" else ">=", point)
    ge = certify_constraint(t, ">=", point)
    le = certify_constraint(-t, ">=", point)
    if ge is None or le is None:
        return None
    eq = ge and le
    return eq if rel == "=" else not eq


def script_truth(script, point: Mapping[str, Fraction]) -> Optional[bool]:
    """Truth of the conjunction of a script's assertions at a point."""
    vals = [formula_truth(f, point) for f in script.assertions]
    if False in vals:
        return False
    return None if None in vals else True


def sample_script(script, box: Mapping[str, tuple], n: int, seed: int = 0, denominator: int = 1 << 12):
    """Yield ``n`` random rational points of ``box`` over the script's variables."""
    rng = random.Random(seed)
    for _ in range(n):
        pt = {}
        for v in script.variables:
            lo, hi = box[v]
            pt[v] = lo + (hi - lo) * Fraction(rng.randint(0, denominator), denominator)
        yield pt


def find_exact_point(script, box, n: int = 10_000, seed: int = 0) -> Optional[dict]:
    """A sampled point where the script is certified True, if any."""
    for pt in sample_script(script, box, n, seed):
        if script_truth(script, pt) is True:
            return pt
    return None


# ---------------------------------------------------------------------------
# Branch and prune


@dataclass(frozen=True)
class BPNode:
    box: tuple[tuple[Fraction, Fraction], ...]
    depth: int


@dataclass(frozen=True)
class OracleResult:
    status: str  # "unsat", "delta-sat" or "unknown"
    model: Optional[dict] = None
    nodes: int = 0


def _unit_bounds(linear: Iterable[LinearClause], variables) -> Optional[dict]:
    """Box from single-atom single-variable clauses; ``None`` if unbounded."""
    lo: dict = {v: None for v in variables}
    hi: dict = {v: None for v in variables}
    for c in linear:
        if len(c.atoms) != 1:
            continue
        a = c.atoms[0]
        if len(a.coefficients) != 1:
            continue
        ((v, k),) = a.coefficients
        if v not in lo:
            continue
        if a.relation in ("<", "<="):
            k, const_ = -k, -a.constant
        else:
            const_ = a.constant
        b = -const_ / k
        if k > 0:
            lo[v] = b if lo[v] is None else max(lo[v], b)
        else:
            hi[v] = b if hi[v] is None else min(hi[v], b)
    if any(lo[v] is None or hi[v] is None for v in variables):
        return None
    return {v: (lo[v], hi[v]) for v in variables}


def _atom_range(a: LinearAtom, box: Mapping[str, tuple]) -> tuple[Fraction, Fraction]:
    lo = hi = a.constant
    for v, k in a.coefficients:
        l, h = box[v]
        if k > 0:
            lo, hi = lo + k * l, hi + k * h
        else:
            lo, hi = lo + k * h, hi + k * l
    return lo, hi


def _atom_refuted(a: LinearAtom, box) -> bool:
    rel = a.relation
    if rel in ("<", "<="):
        lo, _ = _atom_range(a, box)
        return lo >= 0 if rel == "<" else lo > 0
    _, hi = _atom_range(a, box)
    return hi <= 0 if rel == ">" else hi < 0


def _nonlinear_refuted(c: NonlinConstraint, box) -> bool:
    try:
        _, hi = enclose_fractions(c.term, {v: box[v] for v in c.variables}, 48, strict=True)
    except (DomainError, ZeroDivisionError):
        return False
    return hi <= 0 if c.relation == ">" else hi < 0


def _witness(sf, delta, box, variables) -> Optional[dict]:
    """Box center, with fresh term variables set to their term's value."""
    pt = {v: (box[v][0] + box[v][1]) / 2 for v in variables}
    for fv in sf.fresh_vars:
        try:
            lo, hi = enclose_fractions(fv.term, {v: (pt[v], pt[v]) for v in fv.term.variables()}, 96, strict=True)
        except (DomainError, ZeroDivisionError):
            return None
        pt[fv.name] = (lo + hi) / 2
    if certify_delta_model(sf, delta, pt):
        return pt
    return None


def bp_decide(sf, delta, max_depth: int = 24, max_nodes: int = 20_000) -> OracleResult:
    """Bisect the bounding box, pruning boxes that provably violate a constraint.

    Returns ``delta-sat`` with the first certified box center (depth-first,
    lower half first), ``unsat`` when every box is pruned and ``unknown``
    otherwise.
    """
    delta = as_fraction(delta)
    variables = list(sf.variables)
    box0 = _unit_bounds(sf.linear, variables)
    if box0 is None:
        return OracleResult("unknown")
    if any(lo > hi for lo, hi in box0.values()):
        return OracleResult("unsat", nodes=1)
    stack = [BPNode(tuple(box0[v] for v in variables), 0)]
    nodes = 0
    incomplete = False
    while stack:
        node = stack.pop()
        nodes += 1
        if nodes > max_nodes:
            return OracleResult("unknown", nodes=nodes)
        box = dict(zip(variables, node.box))
        if any(all(_atom_refuted(a, box) for a in c.atoms) for c in sf.linear):
            continue
        if any(_nonlinear_refuted(c, box) for c in sf.nonlinear):
            continue
        w = _witness(sf, delta, box, variables)
        if w is not None:
            return OracleResult("delta-sat", w, nodes)
        if node.depth >= max_depth:
            incomplete = True
            continue
        widths = [hi - lo for lo, hi in node.box]
        i = max(range(len(widths)), key=lambda j: (widths[j], -j)) if widths else None
        if i is None or widths[i] == 0:
            incomplete = True
            continue
        lo, hi = node.box[i]
        mid = (lo + hi) / 2
        left = node.box[:i] + ((lo, mid),) + node.box[i + 1 :]
        right = node.box[:i] + ((mid, hi),) + node.box[i + 1 :]
        stack.append(BPNode(right, node.depth + 1))
        stack.append(BPNode(left, node.depth + 1))
    return OracleResult("unknown" if incomplete else "unsat", nodes=nodes)


# ---------------------------------------------------------------------------
# Agreement with the solver


def agreement(sf, delta, status: str, model: Optional[Mapping[str, Fraction]], oracle: OracleResult, script=None) -> tuple[bool, str]:
    """Check a solver answer against the reference decider.

    ``status`` is the solver's answer as printed (``sat``, ``delta-sat``,
    ``unsat`` or ``unknown``).  Answers in the band where both ``unsat``
    and ``delta-sat`` are correct are accepted.
    """
    if status == "delta-sat":
        if model is None or not certify_delta_model(sf, delta, model):
            return False, "solver model does not satisfy the weakened instance"
        return True, "solver model certified"
    if status == "sat":
        if model is None or not certify_model(sf, model):
            return False, "solver model is not an exact model"
        if oracle.status == "unsat":
            return False, "reference decider proved unsat"
        return True, "exact model certified"
    if status == "unsat":
        if oracle.status == "delta-sat" and oracle.model is not None:
            orig = {v: oracle.model[v] for v in (script.variables if script else [])}
            if script is not None and script_truth(script, orig) is True:
                return False, "reference witness satisfies the unweakened instance"
            return True, "reference found only a weakened witness"
        return True, f"reference says {oracle.status}"
    return True, "no claim to check"
