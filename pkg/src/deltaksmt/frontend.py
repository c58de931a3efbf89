"""Input parsing and the transformations that lead to a solver instance.

The input language is a small SMT-LIB 2 subset over the sort ``Real``
with the transcendental symbols ``sin cos exp log sqrt pow`` added.  See
``docs/input-format.md`` for the grammar.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Union

from .core import (
    Assignment,
    Const,
    LinearAtom,
    LinearClause,
    NonlinConstraint,
    Term,
    add,
    affine_form,
    as_fraction,
    const,
    div,
    func,
    mul,
    neg,
    pow_,
    sub,
    var,
)
from .linarith import IntervalSet, feasible_set
from .realeval import DomainError, enclose_fractions


class ParseError(ValueError):
    """Malformed input; ``line`` and ``col`` are 1-based."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line else ""
        super().__init__(where + message)


# ---------------------------------------------------------------------------
# Formulas


@dataclass(frozen=True)
class Atom:
    """``term <relation> 0``; ``origin`` marks atoms coming from a disequality."""

    term: Term
    relation: str
    pos: tuple[int, int] = field(default=(0, 0), compare=False)
    origin: str = ""

    def is_linear(self) -> bool:
        return affine_form(self.term) is not None

    def __str__(self):
        return f"({self.relation} {self.term} 0)"


@dataclass(frozen=True)
class BoolConst:
    value: bool

    def __str__(self):
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Not:
    arg: "Formula"

    def __str__(self):
        return f"(not {self.arg})"


@dataclass(frozen=True)
class And:
    args: tuple["Formula", ...]

    def __str__(self):
        return "(and " + " ".join(map(str, self.args)) + ")"


@dataclass(frozen=True)
class Or:
    args: tuple["Formula", ...]

    def __str__(self):
        return "(or " + " ".join(map(str, self.args)) + ")"


Formula = Union[Atom, BoolConst, Not, And, Or]


@dataclass
class InputScript:
    logic: Optional[str]
    variables: list[str]
    assertions: list[Formula]
    commands: list[str]


# ---------------------------------------------------------------------------
# Tokenizer and s-expression reader


_TOKEN = re.compile(
    r"""(?P<ws>\s+)|(?P<comment>;[^\n]*)|(?P<lp>\()|(?P<rp>\))
       |(?P<str>"(?:[^"]|"")*")|(?P<quoted>\|[^|]*\|)|(?P<atom>[^\s()";|]+)""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    text: str
    line: int
    col: int


def _tokens(text: str) -> list[_Tok]:
    out = []
    line, line_start = 1, 0
    i = 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", line, i - line_start + 1)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tok = m.group()
            if kind == "quoted":
                tok = tok[1:-1]
            out.append(_Tok(tok, line, i - line_start + 1))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = i + chunk.rindex("\n") + 1
        i = m.end()
    return out


@dataclass
class _SExpr:
    items: list
    line: int
    col: int


def _read(tokens: list[_Tok], end: tuple[int, int]) -> list:
    stack: list[_SExpr] = []
    top: list = []
    for tok in tokens:
        if tok.text == "(":
            stack.append(_SExpr([], tok.line, tok.col))
        elif tok.text == ")":
            if not stack:
                raise ParseError("unbalanced ')'", tok.line, tok.col)
            done = stack.pop()
            (stack[-1].items if stack else top).append(done)
        else:
            (stack[-1].items if stack else top).append(tok)
    if stack:
        raise ParseError("unexpected end of input", *end)
    return top


# ---------------------------------------------------------------------------
# Parser


_NUMERAL = re.compile(r"^-?[0-9]+(\.[0-9]+)?$")
_RELS = {"<": "<", "<=": "<=", ">": ">", ">=": ">=", "=": "="}


class _Parser:
    def __init__(self):
        self.logic: Optional[str] = None
        self.variables: list[str] = []
        self.assertions: list[Formula] = []
        self.commands: list[str] = []

    def command(self, sx):
        if not isinstance(sx, _SExpr) or not sx.items or not isinstance(sx.items[0], _Tok):
            raise ParseError("expected a command", sx.line, sx.col)
        head = sx.items[0].text
        args = sx.items[1:]
        if head == "set-logic":
            self._arity(sx, 1)
            self.logic = args[0].text
        elif head == "declare-const":
            self._arity(sx, 2)
            self._declare(args[0], args[1])
        elif head == "declare-fun":
            self._arity(sx, 3)
            if not isinstance(args[1], _SExpr) or args[1].items:
                raise ParseError("only nullary functions are supported", sx.line, sx.col)
            self._declare(args[0], args[2])
        elif head == "assert":
            self._arity(sx, 1)
            self.assertions.append(self.formula(args[0]))
        elif head in ("check-sat", "get-model", "exit"):
            self.commands.append(head)
        elif head in ("set-info", "set-option", "get-info"):
            pass
        else:
            raise ParseError(f"unsupported command {head!r}", sx.line, sx.col)

    def _arity(self, sx: _SExpr, n: int):
        if len(sx.items) - 1 != n:
            raise ParseError(f"{sx.items[0].text} expects {n} argument(s)", sx.line, sx.col)

    def _declare(self, name, sort):
        if not isinstance(name, _Tok):
            raise ParseError("expected a symbol", name.line, name.col)
        if not isinstance(sort, _Tok) or sort.text != "Real":
            raise ParseError("only the sort Real is supported", sort.line, sort.col)
        if name.text in self.variables:
            raise ParseError(f"variable {name.text!r} declared twice", name.line, name.col)
        self.variables.append(name.text)

    # formulas

    def formula(self, sx) -> Formula:
        if isinstance(sx, _Tok):
            if sx.text == "true":
                return BoolConst(True)
            if sx.text == "false":
                return BoolConst(False)
            raise ParseError(f"expected a formula, found {sx.text!r}", sx.line, sx.col)
        if not sx.items or not isinstance(sx.items[0], _Tok):
            raise ParseError("expected a formula", sx.line, sx.col)
        head = sx.items[0].text
        args = sx.items[1:]
        pos = (sx.line, sx.col)
        if head == "not":
            self._arity(sx, 1)
            return Not(self.formula(args[0]))
        if head in ("and", "or"):
            if not args:
                return BoolConst(head == "and")
            parts = tuple(self.formula(a) for a in args)
            return And(parts) if head == "and" else Or(parts)
        if head == "=>":
            self._arity(sx, 2)
            return Or((Not(self.formula(args[0])), self.formula(args[1])))
        if head in _RELS or head == "distinct":
            if len(args) < 2:
                raise ParseError(f"{head} expects at least 2 arguments", *pos)
            terms = [self.term(a) for a in args]
            if head == "distinct":
                atoms = [Atom(sub(a, b), "!=", pos) for a, b in itertools.combinations(terms, 2)]
            else:
                atoms = [Atom(sub(a, b), _RELS[head], pos) for a, b in zip(terms, terms[1:])]
            return atoms[0] if len(atoms) == 1 else And(tuple(atoms))
        raise ParseError(f"unknown predicate {head!r}", *pos)

    # terms

    def term(self, sx) -> Term:
        if isinstance(sx, _Tok):
            t = sx.text
            if _NUMERAL.match(t):
                return const(Fraction(t))
            if t in self.variables:
                return var(t)
            raise ParseError(f"undeclared variable {t!r}", sx.line, sx.col)
        if not sx.items or not isinstance(sx.items[0], _Tok):
            raise ParseError("expected a term", sx.line, sx.col)
        head = sx.items[0].text
        args = [self.term(a) for a in sx.items[1:]]
        pos = (sx.line, sx.col)
        if not args:
            raise ParseError(f"{head} expects arguments", *pos)
        if head == "+":
            out = args[0]
            for a in args[1:]:
                out = add(out, a)
            return out
        if head == "-":
            if len(args) == 1:
                return neg(args[0])
            out = args[0]
            for a in args[1:]:
                out = sub(out, a)
            return out
        if head == "*":
            out = args[0]
            for a in args[1:]:
                out = mul(out, a)
            return out
        if head == "/":
            if len(args) < 2:
                raise ParseError("/ expects at least 2 arguments", *pos)
            out = args[0]
            for a in args[1:]:
                out = div(out, a)
            return out
        if head in ("pow", "^"):
            if len(args) != 2:
                raise ParseError("pow expects 2 arguments", *pos)
            return pow_(args[0], args[1])
        if head in ("sin", "cos", "exp", "log", "sqrt"):
            if len(args) != 1:
                raise ParseError(f"{head} expects 1 argument", *pos)
            return func(head, args[0])
        raise ParseError(f"unknown function {head!r}", *pos)


def parse(text: Union[str, bytes]) -> InputScript:
    """Parse a script; raises :class:`ParseError` with a source position."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = text.split("\n")
    end = (len(lines), len(lines[-1]) + 1)
    p = _Parser()
    for sx in _read(_tokens(text), end):
        if isinstance(sx, _Tok):
            raise ParseError(f"unexpected token {sx.text!r}", sx.line, sx.col)
        p.command(sx)
    return InputScript(p.logic, p.variables, p.assertions, p.commands)


# ---------------------------------------------------------------------------
# Predicate normalization


def negate_term(t: Term) -> Term:
    """``-t`` with the outermost sign pushed into subtractions and constants."""
    return neg(t)


def _normal_atom(term: Term, rel: str, pos, origin: str = "") -> Formula:
    if rel in (">", ">="):
        return Atom(term, rel, pos, origin)
    if rel == "<":
        return Atom(negate_term(term), ">", pos, origin)
    if rel == "<=":
        return Atom(negate_term(term), ">=", pos, origin)
    if rel == "=":
        return And((Atom(negate_term(term), ">=", pos, origin), Atom(term, ">=", pos, origin)))
    return Or((Atom(negate_term(term), ">", pos, "ne"), Atom(term, ">", pos, "ne")))


_FLIP = {">=": "<", ">": "<=", "<=": ">", "<": ">=", "=": "!=", "!=": "="}


def _nnf(f: Formula, positive: bool) -> Formula:
    if isinstance(f, BoolConst):
        return BoolConst(f.value == positive)
    if isinstance(f, Not):
        return _nnf(f.arg, not positive)
    if isinstance(f, Atom):
        rel = f.relation if positive else _FLIP[f.relation]
        return _normal_atom(f.term, rel, f.pos, f.origin)
    parts = tuple(_nnf(a, positive) for a in f.args)
    conj = isinstance(f, And) == positive
    return And(parts) if conj else Or(parts)


def normalize_formula(f: Formula) -> Formula:
    """Negation normal form with every atom of relation ``>`` or ``>=``."""
    return _nnf(f, True)


def normalize_predicates(script: InputScript) -> InputScript:
    return InputScript(
        script.logic,
        list(script.variables),
        [normalize_formula(f) for f in script.assertions],
        list(script.commands),
    )


# ---------------------------------------------------------------------------
# Separated linear form


@dataclass(frozen=True)
class FreshVar:
    """A variable standing for a nonlinear term inside Boolean structure."""

    name: str
    term: Term
    constraints: tuple[int, int]  # indices into SeparatedForm.nonlinear


@dataclass
class SeparatedForm:
    """``(linear, nonlinear)`` plus bookkeeping about introduced variables.

    ``variables`` lists original variables first, in declaration order,
    then fresh term variables and finally selector variables.
    """

    linear: list[LinearClause]
    nonlinear: list[NonlinConstraint]
    variables: list[str]
    original_variables: list[str]
    fresh_vars: list[FreshVar] = field(default_factory=list)
    selectors: list[str] = field(default_factory=list)


FALSE_ATOM = LinearAtom.make(-1, {}, ">=")

# Above this many clauses a disjunction is encoded with selector variables.
DISTRIBUTION_LIMIT = 8


def _linear_atom(a: Atom) -> LinearAtom:
    c, coeffs = affine_form(a.term)
    return LinearAtom.make(c, coeffs, a.relation)


class _Separator:
    def __init__(self, variables: list[str]):
        self.variables = list(variables)
        self.taken = set(variables)
        self.nonlinear: list[NonlinConstraint] = []
        self.fresh: list[FreshVar] = []
        self.selectors: list[str] = []
        self.extra: list[LinearClause] = []
        self._cache: dict[tuple[Term, str], str] = {}

    def _name(self, prefix: str) -> str:
        i = 0
        while f"{prefix}!{i}" in self.taken:
            i += 1
        name = f"{prefix}!{i}"
        self.taken.add(name)
        return name

    def fresh_for(self, term: Term, origin: str) -> tuple[str, Fraction]:
        """Variable standing for ``term`` (sign +1) or its negation (sign -1)."""
        key = (term, origin)
        if key in self._cache:
            return self._cache[key], Fraction(1)
        nkey = (negate_term(term), origin)
        if nkey in self._cache:
            return self._cache[nkey], Fraction(-1)
        name = self._name("t")
        self._cache[key] = name
        t = var(name)
        i = len(self.nonlinear)
        self.nonlinear.append(NonlinConstraint(sub(t, term), ">=", origin=origin))
        self.nonlinear.append(NonlinConstraint(sub(term, t), ">=", origin=origin))
        self.fresh.append(FreshVar(name, term, (i, i + 1)))
        return name, Fraction(1)

    def linear_atom(self, a: Atom) -> LinearAtom:
        if a.is_linear():
            return _linear_atom(a)
        name, sign = self.fresh_for(a.term, a.origin)
        return LinearAtom.make(0, {name: sign}, a.relation)

    def cnf(self, f: Formula) -> list[list[LinearAtom]]:
        if isinstance(f, BoolConst):
            return [] if f.value else [[FALSE_ATOM]]
        if isinstance(f, Atom):
            return [[self.linear_atom(f)]]
        if isinstance(f, And):
            out = []
            for a in f.args:
                out.extend(self.cnf(a))
            return out
        parts = [self.cnf(a) for a in f.args]
        if any(not p for p in parts):
            return []  # a True disjunct
        size = 1
        for p in parts:
            size *= len(p)
        if size <= DISTRIBUTION_LIMIT:
            return [[a for c in combo for a in c] for combo in itertools.product(*parts)]
        # one selector per compound disjunct: s > 0 activates its clauses
        clauses: list[list[LinearAtom]] = []
        head: list[LinearAtom] = []
        for p in parts:
            if len(p) == 1:
                head.extend(p[0])
                continue
            s = self._name("s")
            self.selectors.append(s)
            head.append(LinearAtom.make(0, {s: 1}, ">"))
            for c in p:
                clauses.append([LinearAtom.make(0, {s: -1}, ">=")] + c)
            self.extra.append(LinearClause.of(LinearAtom.make(0, {s: 1}, ">=")))
            self.extra.append(LinearClause.of(LinearAtom.make(1, {s: -1}, ">=")))
        clauses.append(head)
        return clauses


def _flatten_and(f: Formula) -> list[Formula]:
    if isinstance(f, And):
        out = []
        for a in f.args:
            out.extend(_flatten_and(a))
        return out
    return [f]


def to_separated_form(script: InputScript, bound_fresh: bool = True) -> SeparatedForm:
    """Separate a normalized script into linear clauses and nonlinear atoms.

    Top-level nonlinear atoms become constraints directly.  Nonlinear atoms
    under disjunctions are replaced by fresh variables ``t!i`` tied to their
    term by two ``>=`` constraints.  When ``bound_fresh`` is set, each fresh
    variable also receives linear bounds from an enclosure of its term over
    the bounds of its variables, so that bounded inputs stay bounded.
    """
    sep = _Separator(script.variables)
    clauses: list[list[LinearAtom]] = []
    top_nonlinear: list[NonlinConstraint] = []
    for f in script.assertions:
        for g in _flatten_and(normalize_formula(f)):
            if isinstance(g, Atom) and not g.is_linear():
                top_nonlinear.append(NonlinConstraint(g.term, g.relation, origin=g.origin))
            else:
                clauses.extend(sep.cnf(g))
    linear = _dedupe([LinearClause(tuple(c)) for c in clauses] + sep.extra)
    nonlinear = top_nonlinear + sep.nonlinear
    offset = len(top_nonlinear)
    fresh = [FreshVar(fv.name, fv.term, (fv.constraints[0] + offset, fv.constraints[1] + offset)) for fv in sep.fresh]
    names = list(script.variables) + [fv.name for fv in fresh] + sep.selectors
    sf = SeparatedForm(linear, nonlinear, names, list(script.variables), fresh, list(sep.selectors))
    if bound_fresh and fresh:
        sf.linear = _dedupe(sf.linear + _fresh_bounds(sf))
    return sf


def _dedupe(clauses: Iterable[LinearClause]) -> list[LinearClause]:
    seen: dict = {}
    for c in clauses:
        seen.setdefault(c.key(), c)
    return list(seen.values())


def _fresh_bounds(sf: SeparatedForm) -> list[LinearClause]:
    base = univariate_bounds(sf.linear, sf.original_variables)
    out = []
    for fv in sf.fresh_vars:
        box = {}
        for v in fv.term.variables():
            s = base.get(v)
            if s is None or s.is_empty() or not s.is_bounded():
                box = None
                break
            h = s.hull()
            box[v] = (h.lo, h.hi)
        if box is None:
            continue
        try:
            lo, hi = enclose_fractions(fv.term, box, 32, strict=True)
        except (DomainError, ZeroDivisionError):
            continue
        out.append(LinearClause.of(LinearAtom.make(-lo, {fv.name: 1}, ">=")))
        out.append(LinearClause.of(LinearAtom.make(hi, {fv.name: -1}, ">=")))
    return out


# ---------------------------------------------------------------------------
# Weakening


def delta_weaken(sf: SeparatedForm, delta) -> SeparatedForm:
    """The δ-weakening: every nonlinear ``f ⋄ 0`` becomes ``f + δ ⋄ 0``.

    Linear clauses are unchanged.  Constraints that encode a disequality
    weaken to True and are dropped.
    """
    delta = as_fraction(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    weak = [
        NonlinConstraint(add(c.term, Const(delta)), c.relation, c.variables, c.origin)
        for c in sf.nonlinear
        if c.origin != "ne"
    ]
    return SeparatedForm(
        list(sf.linear), weak, list(sf.variables), list(sf.original_variables), list(sf.fresh_vars), list(sf.selectors)
    )


def weaken_constraint(c: NonlinConstraint, delta) -> NonlinConstraint:
    return NonlinConstraint(add(c.term, Const(as_fraction(delta))), c.relation, c.variables, c.origin)


# ---------------------------------------------------------------------------
# Bounds


def univariate_bounds(linear: Iterable[LinearClause], variables: Iterable[str]) -> dict[str, IntervalSet]:
    """Per variable, the set allowed by the clauses mentioning only it."""
    by_var: dict[str, list[LinearClause]] = {v: [] for v in variables}
    for c in linear:
        vs = c.variables
        if len(vs) == 1:
            (v,) = vs
            if v in by_var:
                by_var[v].append(c)
    return {v: feasible_set(cs, Assignment(), v) for v, cs in by_var.items()}


@dataclass
class BoundsReport:
    """Bounds ``B_i``, the box ``D_F`` and the per-constraint boxes ``D_P``.

    Box entries are ``(lo, hi)`` pairs of the hull of ``B_i`` and are
    ``None`` where ``B_i`` is unbounded or empty.
    """

    intervals: dict[str, IntervalSet]
    domain_box: dict[str, Optional[tuple]]
    constraint_boxes: list[dict[str, Optional[tuple]]]
    bounded: bool
    unbounded: list[str]
    empty: list[str]
    domain_violations: list[tuple[int, str]]

    @property
    def domain_ok(self) -> bool:
        return not self.domain_violations


def _hull_pair(s: IntervalSet) -> Optional[tuple]:
    if s.is_empty() or not s.is_bounded():
        return None
    h = s.hull()
    return (h.lo, h.hi)


def bounds_analysis(sf: SeparatedForm) -> BoundsReport:
    intervals = univariate_bounds(sf.linear, sf.variables)
    box = {v: _hull_pair(s) for v, s in intervals.items()}
    unbounded = [v for v, s in intervals.items() if not s.is_bounded()]
    empty = [v for v, s in intervals.items() if s.is_empty()]
    cboxes = []
    violations = []
    for i, c in enumerate(sf.nonlinear):
        dp = {v: box.get(v) for v in c.variables}
        cboxes.append(dp)
        if any(b is None for b in dp.values()):
            continue
        try:
            enclose_fractions(c.term, dp, 24, strict=True)
        except (DomainError, ZeroDivisionError) as e:
            violations.append((i, str(e) or type(e).__name__))
    return BoundsReport(intervals, box, cboxes, not unbounded, unbounded, empty, violations)


# ---------------------------------------------------------------------------
# Convenience


def load(text: Union[str, bytes], bound_fresh: bool = True) -> tuple[InputScript, SeparatedForm]:
    script = parse(text)
    return script, to_separated_form(normalize_predicates(script), bound_fresh)
