"""The solver loop: one rule application per step, with a replayable trace."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

from .core import (
    Assignment,
    LinearClause,
    NonlinConstraint,
    SolverState,
    Status,
    Truth,
    as_fraction,
    eval_clauses,
    eval_exact,
    format_rational,
    is_polynomial,
)
from .frontend import BoundsReport, SeparatedForm, bounds_analysis
from .linarith import backjump_prefix, false_level, feasible_set, pick_value, resolvent
from .linearise import LinearisationOutcome, Strategy, box_exclusion_clause, linearise
from .realeval import (
    DEFAULT_MAX_PRECISION,
    EvaluationFailure,
    Modulus,
    ModulusError,
    uniform_modulus,
)

RULES = ("A", "R", "B", "L", "FSAT", "FUNSAT", "FDSAT")


@dataclass(frozen=True)
class Limits:
    max_steps: int = 10**6
    max_precision: int = DEFAULT_MAX_PRECISION
    wall_clock: Optional[float] = None  # seconds

    def __post_init__(self):
        if self.max_steps <= 0 or self.max_precision <= 0:
            raise ValueError("limits must be positive")
        if self.wall_clock is not None and self.wall_clock <= 0:
            raise ValueError("limits must be positive")


class TraceEvent(dict):
    """One rule application: ``{"step": n, "rule": r, ...payload}``."""

    @property
    def rule(self) -> str:
        return self["rule"]

    def to_json(self) -> str:
        return json.dumps(self)


def _event(step: int, rule: str, **payload) -> TraceEvent:
    ev = TraceEvent(step=step, rule=rule)
    ev.update(payload)
    return ev


def _model_json(alpha: Assignment) -> dict:
    return {v: format_rational(q) for v, q in alpha.trail}


# ---------------------------------------------------------------------------
# Single steps


@dataclass
class Context:
    """Static data for a run plus caches that speed up consecutive steps.

    The caches are keyed on state identity, so passing an unrelated state
    to :func:`step` simply falls back to full evaluation.
    """

    variables: Sequence[str]
    delta: Fraction
    strategy: Strategy = Strategy.LOCAL
    moduli: dict[int, Optional[Modulus]] = field(default_factory=dict)
    limits: Limits = field(default_factory=Limits)
    _hint: Optional[tuple] = field(default=None, repr=False)
    _index: dict = field(default_factory=dict, repr=False)
    _indexed: int = field(default=0, repr=False)
    _last_clause: Optional[LinearClause] = field(default=None, repr=False)

    def clauses_with(self, linear: Sequence[LinearClause], z: str) -> list[LinearClause]:
        """Clauses of ``linear`` mentioning ``z`` (``linear`` only grows)."""
        n = self._indexed
        if n > len(linear) or (n and linear[n - 1] is not self._last_clause):
            self._index, n = {}, 0
        for c in linear[n:]:
            for v in c.variables:
                self._index.setdefault(v, []).append(c)
        self._indexed = len(linear)
        self._last_clause = linear[-1] if linear else None
        return self._index.get(z, [])

    def remember(self, state: SolverState, conflict: Optional[list[LinearClause]]) -> None:
        """Record what is known about ``state``: ``conflict`` lists all clauses
        False under its assignment (an empty list means none is)."""
        self._hint = (state, conflict)

    def known_conflict(self, state: SolverState) -> Optional[list[LinearClause]]:
        if self._hint is not None and self._hint[0] is state:
            return self._hint[1]
        return None


def exact_check(nonlinear: Iterable[NonlinConstraint], alpha) -> bool:
    """True if every constraint is polynomial and holds exactly at ``alpha``."""
    cs = list(nonlinear)
    if not all(is_polynomial(c.term) for c in cs):
        return False
    for c in cs:
        try:
            if not c.holds(eval_exact(c.term, alpha)):
                return False
        except ZeroDivisionError:
            return False
    return True


def _linearise(ctx: Context, i: int, P: NonlinConstraint, alpha) -> LinearisationOutcome:
    return linearise(P, alpha, ctx.delta, ctx.strategy, ctx.moduli.get(i), ctx.limits.max_precision)


def step(state: SolverState, ctx: Context, index: int = 0) -> tuple[SolverState, TraceEvent]:
    """Apply the one rule the control flow selects.

    Raises :class:`EvaluationFailure` when a nonlinear term cannot be
    evaluated at the current assignment.
    """
    if state.status is not Status.RUNNING:
        raise ValueError("the state is already terminal")
    alpha = state.alpha
    conflict = ctx.known_conflict(state)
    if conflict is None:
        conflict = [c for c in state.linear if c.evaluate(alpha) is Truth.FALSE]
    if conflict:
        if len(alpha) == 0:
            return state.with_status(Status.UNSAT), _event(index, "FUNSAT")
        gamma = backjump_prefix(conflict, alpha)
        new_state = state.with_alpha(gamma)
        # clauses without assigned variables stay False under the prefix
        ctx.remember(new_state, [c for c in conflict if false_level(c, alpha) == 0])
        return new_state, _event(index, "B", prefix=len(gamma))

    for z in ctx.variables:
        if z in alpha:
            continue
        relevant = ctx.clauses_with(state.linear, z)
        s = feasible_set(relevant, alpha, z)
        if not s.is_empty():
            q = pick_value(s)
            new_state = state.with_alpha(alpha.extend(z, q))
            ctx.remember(new_state, [])
            return new_state, _event(index, "A", var=z, value=format_rational(q))
        new = resolvent(relevant, alpha, z)
        for c in new:
            if state.contains(c):
                raise AssertionError(f"resolvent {c} is already present")
        new_state = state.with_clauses(new)
        ctx.remember(new_state, list(new))
        return new_state, _event(index, "R", var=z, clauses=[c.to_json() for c in new])

    # alpha is total and the linear part holds
    if exact_check(state.nonlinear, alpha):
        return state.with_status(Status.SAT), _event(index, "FSAT", model=_model_json(alpha))
    for i, P in enumerate(state.nonlinear):
        out = _linearise(ctx, i, P, alpha)
        if out.clause is None:
            continue
        if state.contains(out.clause):
            raise AssertionError(f"linearisation {out.clause} is already present")
        payload = dict(
            constraint=i,
            center=[format_rational(alpha[v]) for v in P.variables],
            eps=format_rational(out.eps),
            strategy=out.strategy.value,
        )
        if out.fallback:
            payload["fallback"] = True
        new_state = state.with_clauses([out.clause])
        ctx.remember(new_state, [out.clause])
        return new_state, _event(index, "L", **payload)
    return state.with_status(Status.DELTA_SAT), _event(index, "FDSAT", model=_model_json(alpha))


# ---------------------------------------------------------------------------
# Runs


@dataclass
class SolveResult:
    status: Status
    state: SolverState
    trace: list[TraceEvent]
    steps: int
    report: Optional[BoundsReport] = None
    note: str = ""

    @property
    def model(self) -> Optional[dict[str, Fraction]]:
        if self.status in (Status.SAT, Status.DELTA_SAT):
            return self.state.alpha.as_dict()
        return None

    def rule_counts(self) -> dict[str, int]:
        out = {r: 0 for r in RULES}
        for ev in self.trace:
            out[ev.rule] += 1
        return out

    def linearisations(self) -> list[TraceEvent]:
        return [ev for ev in self.trace if ev.rule == "L"]


def compute_moduli(sf: SeparatedForm, report: BoundsReport) -> dict[int, Optional[Modulus]]:
    out: dict[int, Optional[Modulus]] = {}
    for i, c in enumerate(sf.nonlinear):
        box = report.constraint_boxes[i]
        if any(b is None for b in box.values()):
            out[i] = None
            continue
        try:
            out[i] = uniform_modulus(c.term, box)
        except ModulusError:
            out[i] = None
    return out


def initial_state(sf: SeparatedForm) -> SolverState:
    return SolverState.initial(sf.linear, sf.nonlinear)


def solve(
    sf: SeparatedForm,
    delta,
    strategy: Strategy = Strategy.LOCAL,
    limits: Optional[Limits] = None,
    on_event: Optional[Callable[[TraceEvent], None]] = None,
) -> SolveResult:
    """Run the calculus on a separated form until a terminal status.

    Statuses beyond SAT, DELTA_SAT and UNSAT: ``RESOURCE_OUT`` when a limit
    is hit and ``UNKNOWN`` when a nonlinear term cannot be evaluated on the
    bounds of its variables.
    """
    delta = as_fraction(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    limits = limits or Limits()
    report = bounds_analysis(sf)
    state = initial_state(sf)
    trace: list[TraceEvent] = []
    if report.domain_violations:
        i, msg = report.domain_violations[0]
        note = f"constraint {sf.nonlinear[i]} is not defined on the bounds of its variables: {msg}"
        return SolveResult(Status.UNKNOWN, state.with_status(Status.UNKNOWN), trace, 0, report, note)
    ctx = Context(sf.variables, delta, strategy, compute_moduli(sf, report), limits)
    start = time.monotonic()
    n = 0
    note = ""
    while state.status is Status.RUNNING:
        if n >= limits.max_steps:
            state = state.with_status(Status.RESOURCE_OUT)
            note = f"step limit {limits.max_steps} reached"
            break
        if limits.wall_clock is not None and time.monotonic() - start > limits.wall_clock:
            state = state.with_status(Status.RESOURCE_OUT)
            note = f"time limit {limits.wall_clock}s reached"
            break
        try:
            state, ev = step(state, ctx, n)
        except EvaluationFailure as exc:
            state = state.with_status(Status.UNKNOWN)
            note = f"evaluation failed: {exc}"
            break
        trace.append(ev)
        if on_event is not None:
            on_event(ev)
        n += 1
    if state.status is Status.RESOURCE_OUT and not report.bounded:
        note += f"; the instance is unbounded in {', '.join(report.unbounded)}"
    return SolveResult(state.status, state, trace, n, report, note)


# ---------------------------------------------------------------------------
# Replay


def replay(sf: SeparatedForm, events: Iterable[dict]) -> SolverState:
    """Rebuild the state a trace describes, starting from ``sf``."""
    state = initial_state(sf)
    for ev in events:
        rule = ev["rule"]
        if rule == "A":
            state = state.with_alpha(state.alpha.extend(ev["var"], Fraction(ev["value"])))
        elif rule == "R":
            state = state.with_clauses(LinearClause.from_json(c) for c in ev["clauses"])
        elif rule == "B":
            state = state.with_alpha(state.alpha.prefix(ev["prefix"]))
        elif rule == "L":
            P = state.nonlinear[ev["constraint"]]
            center = [Fraction(c) for c in ev["center"]]
            state = state.with_clauses([box_exclusion_clause(center, Fraction(ev["eps"]), P.variables)])
        elif rule == "FSAT":
            state = state.with_status(Status.SAT)
        elif rule == "FUNSAT":
            state = state.with_status(Status.UNSAT)
        elif rule == "FDSAT":
            state = state.with_status(Status.DELTA_SAT)
        else:
            raise ValueError(f"unknown rule {rule!r}")
    return state


def read_trace(lines: Iterable[str]) -> list[dict]:
    return [json.loads(line) for line in lines if line.strip()]


# ---------------------------------------------------------------------------
# Post-run checks


def packing_bound_holds(sf: SeparatedForm, result: SolveResult) -> bool:
    """Linearisations per constraint stay below ``(ceil(d/eps) + 1)**n``.

    ``d`` is the max-norm diameter of the constraint's box and ``eps`` the
    smallest radius logged for it.
    """
    report = result.report or bounds_analysis(sf)
    per: dict[int, list[Fraction]] = {}
    for ev in result.linearisations():
        per.setdefault(ev["constraint"], []).append(Fraction(ev["eps"]))
    for i, eps_list in per.items():
        box = report.constraint_boxes[i]
        if any(b is None for b in box.values()):
            continue
        n = len(box)
        d = max((hi - lo for lo, hi in box.values()), default=Fraction(0))
        eps = min(eps_list)
        if len(eps_list) > (math.ceil(d / eps) + 1) ** n:
            return False
    return True
