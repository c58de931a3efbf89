"""Linearisations of nonlinear constraints that fail under an assignment.

Both strategies check ``f(x) ⋄ -δ/2`` on an approximation of ``f`` at the
assigned point.  If the check fails the point is excluded together with a
max-norm ball around it, whose radius comes either from a uniform modulus
of continuity (full box) or from the largest oracle query the evaluator
made (local).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .core import (
    LinearAtom,
    LinearClause,
    NonlinConstraint,
    SolverState,
    Status,
    Truth,
    as_fraction,
    eval_clauses,
)
from .realeval import (
    EvaluationFailure,
    Modulus,
    constant_name,
    eval_machine,
    p_of_delta,
    xi_name_of,
)


class Strategy(enum.Enum):
    FULL_BOX = "full-box"
    LOCAL = "local"


# Slack on the oracle query cap relative to the modulus.
QUERY_SLACK = 4


@dataclass(frozen=True)
class LinearisationOutcome:
    """Result of linearising one constraint at one point.

    ``clause`` is ``None`` when the weakened constraint holds at the point.
    ``fallback`` is set when full-box mode had no modulus and local mode
    was used instead.
    """

    clause: Optional[LinearClause]
    eps: Optional[Fraction]
    strategy: Strategy
    value: Fraction
    max_query: int
    fallback: bool = False


def box_exclusion_clause(center: Sequence, eps, variables: Sequence[str]) -> LinearClause:
    """``OR_i (x_i <= c_i - eps  or  x_i >= c_i + eps)``.

    False exactly on the open max-norm ball of radius ``eps`` at ``center``.
    With no variables the ball is the whole (zero-dimensional) space and
    the clause is the contradiction ``-1 >= 0``.
    """
    eps = as_fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if len(center) != len(variables):
        raise ValueError("center and variables differ in length")
    atoms = []
    for v, c in zip(variables, center):
        c = as_fraction(c)
        atoms.append(LinearAtom.make(c - eps, {v: -1}, ">="))
        atoms.append(LinearAtom.make(-(c + eps), {v: 1}, ">="))
    if not atoms:
        atoms.append(LinearAtom.make(-1, {}, ">="))
    return LinearClause(tuple(atoms))


def _holds_weakened(value: Fraction, relation: str, delta: Fraction) -> bool:
    bound = -delta / 2
    return value > bound if relation == ">" else value >= bound


def _point(P: NonlinConstraint, alpha) -> tuple[Fraction, ...]:
    try:
        return tuple(alpha[v] for v in P.variables)
    except KeyError as exc:
        raise ValueError(f"variable {exc.args[0]} of {P} is unassigned") from None


def linearise_fullbox(P: NonlinConstraint, alpha, delta, mu: Modulus) -> LinearisationOutcome:
    """Evaluate at precision ``p(δ)``; exclude a ball of radius ``2**-mu(p)``."""
    delta = as_fraction(delta)
    p = p_of_delta(delta)
    x = _point(P, alpha)
    res = eval_machine(P.term, constant_name(x), p, P.variables, max_query=mu(p) + QUERY_SLACK)
    y = res.value.to_fraction()
    if _holds_weakened(y, P.relation, delta):
        return LinearisationOutcome(None, None, Strategy.FULL_BOX, y, res.max_query)
    eps = Fraction(1, 1 << mu(p))
    return LinearisationOutcome(box_exclusion_clause(x, eps, P.variables), eps, Strategy.FULL_BOX, y, res.max_query)


def linearise_local(
    P: NonlinConstraint, alpha, delta, mu: Optional[Modulus] = None, max_query: Optional[int] = None
) -> LinearisationOutcome:
    """Evaluate on a xi-name at precision ``p(δ)+2``; the radius is ``2**-k``.

    ``k`` is the largest query the evaluator made.  A known modulus caps
    the queries at ``mu(p+2) + 4``.
    """
    delta = as_fraction(delta)
    p = p_of_delta(delta)
    x = _point(P, alpha)
    if max_query is None and mu is not None:
        max_query = mu(p + 2) + QUERY_SLACK
    res = eval_machine(P.term, xi_name_of(x), p + 2, P.variables, max_query=max_query)
    y = res.value.to_fraction()
    if _holds_weakened(y, P.relation, delta):
        return LinearisationOutcome(None, None, Strategy.LOCAL, y, res.max_query)
    eps = Fraction(1, 1 << res.max_query)
    return LinearisationOutcome(box_exclusion_clause(x, eps, P.variables), eps, Strategy.LOCAL, y, res.max_query)


def linearise(
    P: NonlinConstraint,
    alpha,
    delta,
    strategy: Strategy,
    mu: Optional[Modulus] = None,
    max_query: Optional[int] = None,
) -> LinearisationOutcome:
    """Dispatch on ``strategy``.

    Without a modulus, or when interval overestimation keeps the evaluator
    from converging under the modulus-derived query cap, the local radius
    is used with queries capped at ``max_query`` and ``fallback`` is set
    (unless local mode was asked for and there is no modulus).
    """
    if mu is not None:
        try:
            if strategy is Strategy.FULL_BOX:
                return linearise_fullbox(P, alpha, delta, mu)
            return linearise_local(P, alpha, delta, mu)
        except EvaluationFailure:
            pass
    elif strategy is Strategy.LOCAL:
        return linearise_local(P, alpha, delta, max_query=max_query)
    return replace(linearise_local(P, alpha, delta, max_query=max_query), fallback=True)


@dataclass(frozen=True)
class NlinResult:
    """Outcome of :func:`nlin_step`.

    ``state`` carries the new clause (rule L) or has status ``DELTA_SAT``.
    ``index`` is the constraint that produced the clause.
    """

    state: SolverState
    index: Optional[int] = None
    outcome: Optional[LinearisationOutcome] = None

    @property
    def delta_sat(self) -> bool:
        return self.state.status is Status.DELTA_SAT


def nlin_step(
    state: SolverState,
    delta,
    strategy: Strategy = Strategy.LOCAL,
    moduli: Optional[Mapping[int, Optional[Modulus]]] = None,
) -> NlinResult:
    """Linearise the first constraint, in order, failing its weakening at α.

    Raises :class:`EvaluationFailure` if a constraint cannot be evaluated.
    """
    alpha = state.alpha
    if eval_clauses(state.linear, alpha) is not Truth.TRUE:
        raise ValueError("nlin_step needs the linear part True under a total assignment")
    moduli = moduli or {}
    for i, P in enumerate(state.nonlinear):
        out = linearise(P, alpha, delta, strategy, moduli.get(i))
        if out.clause is not None:
            return NlinResult(state.with_clauses([out.clause]), i, out)
    return NlinResult(state.with_status(Status.DELTA_SAT))


__all__ = [
    "EvaluationFailure",
    "LinearisationOutcome",
    "NlinResult",
    "Strategy",
    "box_exclusion_clause",
    "linearise",
    "linearise_fullbox",
    "linearise_local",
    "nlin_step",
]
