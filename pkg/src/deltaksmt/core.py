"""Exact data model shared by every part of the solver.

Rationals are :class:`fractions.Fraction`.  Terms are immutable trees; linear
atoms are affine forms ``constant + sum(c_i * x_i) <rel> 0``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

Rational = Fraction

RELATIONS = ("<", "<=", ">", ">=", "=", "!=")
FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise TypeError("floating point values are not accepted; use Fraction")
    return Fraction(value)


def format_rational(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def parse_rational(text: str) -> Fraction:
    return Fraction(text)


# ---------------------------------------------------------------------------
# Dyadic numbers


@dataclass(frozen=True, order=False)
class Dyadic:
    """The number ``mantissa * 2**exponent``, kept with an odd mantissa."""

    mantissa: int
    exponent: int = 0

    def __post_init__(self):
        m, e = self.mantissa, self.exponent
        if m == 0:
            e = 0
        else:
            tz = (m & -m).bit_length() - 1
            if tz:
                m >>= tz
                e += tz
        object.__setattr__(self, "mantissa", m)
        object.__setattr__(self, "exponent", e)

    @classmethod
    def from_fraction(cls, q: Fraction) -> "Dyadic":
        q = as_fraction(q)
        den = q.denominator
        if den & (den - 1):
            raise ValueError(f"{q} is not a dyadic rational")
        return cls(q.numerator, -(den.bit_length() - 1))

    @classmethod
    def from_scaled(cls, n: int, scale: int) -> "Dyadic":
        """``n / 2**scale``."""
        return cls(n, -scale)

    def to_fraction(self) -> Fraction:
        if self.exponent >= 0:
            return Fraction(self.mantissa << self.exponent)
        return Fraction(self.mantissa, 1 << -self.exponent)

    def __float__(self) -> float:
        return math.ldexp(self.mantissa, self.exponent) if self.mantissa.bit_length() < 1000 else float(self.to_fraction())

    def _cmp_key(self, other) -> tuple[Fraction, Fraction]:
        o = other.to_fraction() if isinstance(other, Dyadic) else as_fraction(other)
        return self.to_fraction(), o

    def __lt__(self, other):
        a, b = self._cmp_key(other)
        return a < b

    def __le__(self, other):
        a, b = self._cmp_key(other)
        return a <= b

    def __gt__(self, other):
        a, b = self._cmp_key(other)
        return a > b

    def __ge__(self, other):
        a, b = self._cmp_key(other)
        return a >= b

    def __add__(self, other: "Dyadic") -> "Dyadic":
        e = min(self.exponent, other.exponent)
        return Dyadic((self.mantissa << (self.exponent - e)) + (other.mantissa << (other.exponent - e)), e)

    def __neg__(self) -> "Dyadic":
        return Dyadic(-self.mantissa, self.exponent)

    def __sub__(self, other: "Dyadic") -> "Dyadic":
        return self + (-other)

    def __mul__(self, other: "Dyadic") -> "Dyadic":
        return Dyadic(self.mantissa * other.mantissa, self.exponent + other.exponent)

    def __str__(self) -> str:
        return format_rational(self.to_fraction())


# ---------------------------------------------------------------------------
# Nonlinear terms


class Term:
    """Base class of expression trees.  Use the module-level builders."""

    __slots__ = ()

    def variables(self) -> frozenset[str]:
        out: set[str] = set()
        stack = [self]
        while stack:
            t = stack.pop()
            if isinstance(t, Var):
                out.add(t.name)
            else:
                stack.extend(t.children())
        return frozenset(out)

    def children(self) -> tuple["Term", ...]:
        return ()

    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __neg__(self):
        return neg(self)


def _coerce(value) -> Term:
    if isinstance(value, Term):
        return value
    return Const(as_fraction(value))


@dataclass(frozen=True)
class Var(Term):
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const(Term):
    value: Fraction

    def __str__(self):
        v = self.value
        if v < 0:
            return f"(- {Const(-v)})"
        if v.denominator == 1:
            return str(v.numerator)
        return f"(/ {v.numerator} {v.denominator})"


@dataclass(frozen=True)
class Neg(Term):
    arg: Term

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"(- {self.arg})"


@dataclass(frozen=True)
class BinOp(Term):
    op: str  # one of + - * /
    left: Term
    right: Term

    def children(self):
        return (self.left, self.right)

    def __str__(self):
        return f"({self.op} {self.left} {self.right})"


@dataclass(frozen=True)
class Pow(Term):
    base: Term
    exponent: Term

    def children(self):
        return (self.base, self.exponent)

    def __str__(self):
        return f"(pow {self.base} {self.exponent})"


@dataclass(frozen=True)
class Func(Term):
    name: str
    arg: Term

    def __post_init__(self):
        if self.name not in FUNCTIONS:
            raise ValueError(f"unsupported function {self.name!r}")

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"({self.name} {self.arg})"


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def const(value) -> Const:
    return Const(as_fraction(value))


def var(name: str) -> Var:
    return Var(name)


def neg(a: Term) -> Term:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    if isinstance(a, BinOp) and a.op == "-":
        return BinOp("-", a.right, a.left)
    return Neg(a)


def add(a: Term, b: Term) -> Term:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    if isinstance(b, Neg):
        return BinOp("-", a, b.arg)
    return BinOp("+", a, b)


def sub(a: Term, b: Term) -> Term:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if b == ZERO:
        return a
    if a == ZERO:
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Term, b: Term) -> Term:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return BinOp("*", a, b)


def div(a: Term, b: Term) -> Term:
    if isinstance(b, Const):
        if b.value == 0:
            return BinOp("/", a, b)
        if isinstance(a, Const):
            return Const(a.value / b.value)
        if b.value == 1:
            return a
    return BinOp("/", a, b)


def pow_(a: Term, b: Term) -> Term:
    if isinstance(b, Const) and b.value.denominator == 1:
        n = b.value.numerator
        if isinstance(a, Const) and (a.value != 0 or n >= 0):
            return Const(a.value ** n)
        if n == 1:
            return a
        if n == 0:
            return ONE
    return Pow(a, b)


def func(name: str, a: Term) -> Term:
    if name == "exp" and a == ZERO:
        return ONE
    if name in ("sin",) and a == ZERO:
        return ZERO
    if name == "cos" and a == ZERO:
        return ONE
    return Func(name, a)


def affine_form(t: Term) -> Optional[tuple[Fraction, dict[str, Fraction]]]:
    """Return ``(constant, coefficients)`` if ``t`` is affine, else ``None``."""
    if isinstance(t, Const):
        return t.value, {}
    if isinstance(t, Var):
        return Fraction(0), {t.name: Fraction(1)}
    if isinstance(t, Neg):
        f = affine_form(t.arg)
        if f is None:
            return None
        return -f[0], {k: -v for k, v in f[1].items()}
    if isinstance(t, BinOp):
        fa = affine_form(t.left)
        fb = affine_form(t.right)
        if fa is None or fb is None:
            return None
        if t.op in "+-":
            s = 1 if t.op == "+" else -1
            coeffs = dict(fa[1])
            for k, v in fb[1].items():
                coeffs[k] = coeffs.get(k, 0) + s * v
            return fa[0] + s * fb[0], {k: v for k, v in coeffs.items() if v}
        if t.op == "*":
            if not fa[1]:
                c = fa[0]
                return c * fb[0], {k: c * v for k, v in fb[1].items() if c * v}
            if not fb[1]:
                c = fb[0]
                return c * fa[0], {k: c * v for k, v in fa[1].items() if c * v}
            return None
        if t.op == "/":
            if fb[1] or fb[0] == 0:
                return None
            c = fb[0]
            return fa[0] / c, {k: v / c for k, v in fa[1].items()}
    if isinstance(t, Pow):
        fe = affine_form(t.exponent)
        if fe is not None and not fe[1] and fe[0] == 1:
            return affine_form(t.base)
    return None


def is_polynomial(t: Term) -> bool:
    """True when exact rational evaluation of ``t`` is possible."""
    if isinstance(t, (Const, Var)):
        return True
    if isinstance(t, Neg):
        return is_polynomial(t.arg)
    if isinstance(t, BinOp):
        if t.op == "/":
            return is_polynomial(t.left) and isinstance(t.right, Const) and t.right.value != 0
        return is_polynomial(t.left) and is_polynomial(t.right)
    if isinstance(t, Pow):
        e = t.exponent
        return isinstance(e, Const) and e.value.denominator == 1 and e.value >= 0 and is_polynomial(t.base)
    return False


def eval_exact(t: Term, env: Mapping[str, Fraction]) -> Fraction:
    """Exact value of a polynomial term; raises ``ValueError`` otherwise."""
    if isinstance(t, Const):
        return t.value
    if isinstance(t, Var):
        return env[t.name]
    if isinstance(t, Neg):
        return -eval_exact(t.arg, env)
    if isinstance(t, BinOp):
        a = eval_exact(t.left, env)
        b = eval_exact(t.right, env)
        if t.op == "+":
            return a + b
        if t.op == "-":
            return a - b
        if t.op == "*":
            return a * b
        if b == 0:
            raise ZeroDivisionError("division by zero")
        return a / b
    if isinstance(t, Pow) and isinstance(t.exponent, Const) and t.exponent.value.denominator == 1:
        b = eval_exact(t.base, env)
        n = t.exponent.value.numerator
        if b == 0 and n < 0:
            raise ZeroDivisionError("division by zero")
        return b**n
    raise ValueError(f"term {t} has no exact rational value")


# ---------------------------------------------------------------------------
# Assignments


class Assignment:
    """Ordered partial map variable -> rational (the trail)."""

    __slots__ = ("_trail", "_values")

    def __init__(self, trail: Iterable[tuple[str, Fraction]] = ()):
        self._trail: tuple[tuple[str, Fraction], ...] = tuple((v, as_fraction(q)) for v, q in trail)
        self._values = dict(self._trail)
        if len(self._values) != len(self._trail):
            raise ValueError("variable assigned twice")

    @property
    def trail(self) -> tuple[tuple[str, Fraction], ...]:
        return self._trail

    def extend(self, name: str, value) -> "Assignment":
        if name in self._values:
            raise ValueError(f"{name} already assigned")
        new = Assignment.__new__(Assignment)
        new._trail = self._trail + ((name, as_fraction(value)),)
        new._values = dict(self._values)
        new._values[name] = new._trail[-1][1]
        return new

    def prefix(self, n: int) -> "Assignment":
        return Assignment(self._trail[:n])

    def position(self, name: str) -> int:
        for i, (v, _) in enumerate(self._trail):
            if v == name:
                return i
        raise KeyError(name)

    def get(self, name: str, default=None):
        return self._values.get(name, default)

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def __getitem__(self, name: str) -> Fraction:
        return self._values[name]

    def __len__(self) -> int:
        return len(self._trail)

    def __iter__(self) -> Iterator[str]:
        return (v for v, _ in self._trail)

    def as_dict(self) -> dict[str, Fraction]:
        return dict(self._values)

    def __eq__(self, other):
        return isinstance(other, Assignment) and self._trail == other._trail

    def __hash__(self):
        return hash(self._trail)

    def __repr__(self):
        inner = ", ".join(f"{v}->{format_rational(q)}" for v, q in self._trail)
        return f"Assignment({inner})"


# ---------------------------------------------------------------------------
# Linear atoms and clauses


class Truth(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"

    def __bool__(self):
        raise TypeError("Truth has no implicit boolean value")


def _compare(value: Fraction, rel: str) -> bool:
    if rel == ">=":
        return value >= 0
    if rel == ">":
        return value > 0
    if rel == "<=":
        return value <= 0
    if rel == "<":
        return value < 0
    if rel == "=":
        return value == 0
    if rel == "!=":
        return value != 0
    raise ValueError(rel)


_MIRROR = {">=": "<=", ">": "<", "<=": ">=", "<": ">", "=": "=", "!=": "!="}


def _compare_pair(x: Fraction, rel: str, t: Fraction) -> bool:
    if rel == ">=":
        return x >= t
    if rel == ">":
        return x > t
    if rel == "<=":
        return x <= t
    if rel == "<":
        return x < t
    if rel == "=":
        return x == t
    return x != t


@dataclass(frozen=True)
class LinearAtom:
    """``constant + sum(coeff * var) <relation> 0``."""

    constant: Fraction
    coefficients: tuple[tuple[str, Fraction], ...]
    relation: str = ">="

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"bad relation {self.relation!r}")
        coeffs = tuple(sorted((v, as_fraction(c)) for v, c in self.coefficients if c != 0))
        if len({v for v, _ in coeffs}) != len(coeffs):
            raise ValueError("duplicate variable in linear atom")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "constant", as_fraction(self.constant))
        object.__setattr__(self, "_vars", tuple(v for v, _ in coeffs))
        # univariate atoms compare the variable against a fixed threshold
        if len(coeffs) == 1:
            (v, k), = coeffs
            rel = self.relation if k > 0 else _MIRROR[self.relation]
            object.__setattr__(self, "_threshold", (v, -self.constant / k, rel))
        else:
            object.__setattr__(self, "_threshold", None)

    @classmethod
    def make(cls, constant, coeffs: Mapping[str, Fraction] | Iterable, relation: str = ">=") -> "LinearAtom":
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        return cls(as_fraction(constant), tuple((v, as_fraction(c)) for v, c in items), relation)

    @property
    def variables(self) -> tuple[str, ...]:
        return self._vars

    def coefficient(self, name: str) -> Fraction:
        for v, c in self.coefficients:
            if v == name:
                return c
        return Fraction(0)

    def value(self, alpha: Mapping[str, Fraction] | Assignment) -> Optional[Fraction]:
        total = self.constant
        for v, c in self.coefficients:
            x = alpha.get(v)
            if x is None:
                return None
            total += c * x
        return total

    def evaluate(self, alpha) -> Truth:
        th = self._threshold
        if th is not None:
            x = alpha.get(th[0])
            if x is None:
                return Truth.UNKNOWN
            return Truth.TRUE if _compare_pair(x, th[2], th[1]) else Truth.FALSE
        val = self.value(alpha)
        if val is None:
            return Truth.UNKNOWN
        return Truth.TRUE if _compare(val, self.relation) else Truth.FALSE

    def negate(self) -> "LinearAtom":
        flip = {">=": "<", ">": "<=", "<=": ">", "<": ">=", "=": "!=", "!=": "="}
        return LinearAtom(self.constant, self.coefficients, flip[self.relation])

    def scaled(self, factor: Fraction) -> "LinearAtom":
        return LinearAtom(self.constant * factor, tuple((v, c * factor) for v, c in self.coefficients), self.relation)

    def normalized(self) -> list["LinearAtom"]:
        """Rewrite into a conjunction/disjunction-free ``>``/``>=`` list.

        ``=`` yields two atoms meant conjunctively; ``!=`` two atoms meant
        disjunctively.  Other relations yield one atom.
        """
        r = self.relation
        if r in (">=", ">"):
            return [self]
        neg_self = self.scaled(Fraction(-1))
        if r == "<=":
            return [LinearAtom(neg_self.constant, neg_self.coefficients, ">=")]
        if r == "<":
            return [LinearAtom(neg_self.constant, neg_self.coefficients, ">")]
        if r == "=":
            return [LinearAtom(neg_self.constant, neg_self.coefficients, ">="), LinearAtom(self.constant, self.coefficients, ">=")]
        return [LinearAtom(neg_self.constant, neg_self.coefficients, ">"), LinearAtom(self.constant, self.coefficients, ">")]

    def to_json(self) -> dict:
        return {
            "const": format_rational(self.constant),
            "coeffs": [[v, format_rational(c)] for v, c in self.coefficients],
            "rel": self.relation,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "LinearAtom":
        return cls(Fraction(data["const"]), tuple((v, Fraction(c)) for v, c in data["coeffs"]), data["rel"])

    def __str__(self):
        parts = []
        for v, c in self.coefficients:
            if c == 1:
                parts.append(v)
            elif c == -1:
                parts.append(f"-{v}")
            else:
                parts.append(f"{format_rational(c)}*{v}")
        if self.constant or not parts:
            parts.append(format_rational(self.constant))
        return " + ".join(parts).replace("+ -", "- ") + f" {self.relation} 0"


def linear_atom(constant, relation: str = ">=", **coeffs) -> LinearAtom:
    """Convenience builder: ``linear_atom(-1, '>=', x=1)`` is ``x - 1 >= 0``."""
    return LinearAtom.make(constant, coeffs, relation)


@dataclass(frozen=True)
class LinearClause:
    """Disjunction of linear atoms; the complement of a rational polytope."""

    atoms: tuple[LinearAtom, ...]

    def __post_init__(self):
        seen: dict[LinearAtom, None] = {}
        for a in self.atoms:
            seen.setdefault(a, None)
        if not seen:
            raise ValueError("a clause needs at least one atom")
        object.__setattr__(self, "atoms", tuple(seen))

    @classmethod
    def of(cls, *atoms: LinearAtom) -> "LinearClause":
        return cls(tuple(atoms))

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(v for a in self.atoms for v in a.variables)

    def evaluate(self, alpha) -> Truth:
        unknown = False
        for a in self.atoms:
            t = a.evaluate(alpha)
            if t is Truth.TRUE:
                return Truth.TRUE
            if t is Truth.UNKNOWN:
                unknown = True
        return Truth.UNKNOWN if unknown else Truth.FALSE

    def key(self) -> frozenset[LinearAtom]:
        return frozenset(self.atoms)

    def to_json(self) -> list:
        return [a.to_json() for a in self.atoms]

    @classmethod
    def from_json(cls, data) -> "LinearClause":
        return cls(tuple(LinearAtom.from_json(a) for a in data))

    def __str__(self):
        return "(" + " | ".join(str(a) for a in self.atoms) + ")"


def eval_atom(atom: LinearAtom, alpha) -> Truth:
    return atom.evaluate(alpha)


def eval_clause(clause: LinearClause, alpha) -> Truth:
    return clause.evaluate(alpha)


def eval_clauses(clauses: Iterable[LinearClause], alpha) -> Truth:
    """Conjunction of clauses under ``alpha``."""
    unknown = False
    for c in clauses:
        t = c.evaluate(alpha)
        if t is Truth.FALSE:
            return Truth.FALSE
        if t is Truth.UNKNOWN:
            unknown = True
    return Truth.UNKNOWN if unknown else Truth.TRUE


# ---------------------------------------------------------------------------
# Nonlinear constraints and solver state


@dataclass(frozen=True)
class NonlinConstraint:
    """``term <relation> 0`` with relation ``>`` or ``>=``.

    ``variables`` is fixed at construction (it may list variables that
    constant folding removed from ``term``).  ``origin`` is ``"ne"`` for
    constraints that encode a disequality, which vanish under weakening.
    """

    term: Term
    relation: str = ">="
    variables: tuple[str, ...] = ()
    origin: str = ""

    def __post_init__(self):
        if self.relation not in (">", ">="):
            raise ValueError("nonlinear constraints use only '>' or '>='")
        vs = tuple(sorted(set(self.variables) | self.term.variables()))
        object.__setattr__(self, "variables", vs)

    def holds(self, value: Fraction) -> bool:
        return _compare(value, self.relation)

    def __str__(self):
        return f"({self.relation} {self.term} 0)"


class Status(enum.Enum):
    RUNNING = "running"
    SAT = "sat"
    DELTA_SAT = "delta-sat"
    UNSAT = "unsat"
    RESOURCE_OUT = "resource-out"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SolverState:
    alpha: Assignment
    linear: tuple[LinearClause, ...]
    nonlinear: tuple[NonlinConstraint, ...]
    status: Status = Status.RUNNING
    _keys: frozenset = field(default=frozenset(), repr=False, compare=False)

    def __post_init__(self):
        if not self._keys and self.linear:
            object.__setattr__(self, "_keys", frozenset(c.key() for c in self.linear))

    @classmethod
    def initial(cls, linear: Sequence[LinearClause], nonlinear: Sequence[NonlinConstraint]) -> "SolverState":
        uniq: dict = {}
        for c in linear:
            uniq.setdefault(c.key(), c)
        return cls(Assignment(), tuple(uniq.values()), tuple(nonlinear))

    def contains(self, clause: LinearClause) -> bool:
        return clause.key() in self._keys

    def with_alpha(self, alpha: Assignment) -> "SolverState":
        return SolverState(alpha, self.linear, self.nonlinear, self.status, self._keys)

    def with_clauses(self, clauses: Iterable[LinearClause]) -> "SolverState":
        new = list(self.linear)
        keys = set(self._keys)
        for c in clauses:
            k = c.key()
            if k in keys:
                raise ValueError(f"clause {c} is already present")
            keys.add(k)
            new.append(c)
        return SolverState(self.alpha, tuple(new), self.nonlinear, self.status, frozenset(keys))

    def with_status(self, status: Status) -> "SolverState":
        return SolverState(self.alpha, self.linear, self.nonlinear, status, self._keys)


Number = Union[int, Fraction]
