"""Linear reasoning for the calculus: feasible values, resolvents, backjumps."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .core import Assignment, LinearAtom, LinearClause, Truth, as_fraction

class PreconditionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Interval sets


@dataclass(frozen=True)
class Interval:
    """Rational interval; ``lo``/``hi`` of ``None`` are -inf/+inf."""

    lo: Optional[Fraction]
    hi: Optional[Fraction]
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if self.lo is None:
            object.__setattr__(self, "lo_closed", False)
        if self.hi is None:
            object.__setattr__(self, "hi_closed", False)

    def is_empty(self) -> bool:
        if self.lo is None or self.hi is None:
            return False
        if self.lo < self.hi:
            return False
        if self.lo == self.hi:
            return not (self.lo_closed and self.hi_closed)
        return True

    def contains(self, q: Fraction) -> bool:
        if self.lo is not None and (q < self.lo or (q == self.lo and not self.lo_closed)):
            return False
        if self.hi is not None and (q > self.hi or (q == self.hi and not self.hi_closed)):
            return False
        return True

    def __str__(self):
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        lo = "-inf" if self.lo is None else str(self.lo)
        hi = "+inf" if self.hi is None else str(self.hi)
        return f"{left}{lo}, {hi}{right}"


def _lo_key(iv: Interval):
    # order lower endpoints: -inf first, closed before open at equal values
    return (0, 0, 0) if iv.lo is None else (1, iv.lo, 0 if iv.lo_closed else 1)


def _touches(a: Interval, b: Interval) -> bool:
    """True if ``a`` followed by ``b`` (sorted by lo) leaves no gap."""
    if a.hi is None or b.lo is None:
        return True
    if b.lo < a.hi:
        return True
    if b.lo == a.hi:
        return a.hi_closed or b.lo_closed
    return False


def _hi_greater(a: Interval, b: Interval) -> bool:
    if a.hi is None:
        return b.hi is not None
    if b.hi is None:
        return False
    return a.hi > b.hi or (a.hi == b.hi and a.hi_closed and not b.hi_closed)


class IntervalSet:
    """Finite union of disjoint rational intervals, kept normalized."""

    __slots__ = ("intervals",)

    def __init__(self, intervals: Iterable[Interval] = ()):
        ivs = sorted((iv for iv in intervals if not iv.is_empty()), key=_lo_key)
        merged: list[Interval] = []
        for iv in ivs:
            if merged and _touches(merged[-1], iv):
                last = merged[-1]
                if _hi_greater(iv, last):
                    merged[-1] = Interval(last.lo, iv.hi, last.lo_closed, iv.hi_closed)
            else:
                merged.append(iv)
        self.intervals: tuple[Interval, ...] = tuple(merged)

    @classmethod
    def everything(cls) -> "IntervalSet":
        return cls([Interval(None, None)])

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls()

    @classmethod
    def closed(cls, lo, hi) -> "IntervalSet":
        return cls([Interval(as_fraction(lo), as_fraction(hi))])

    def is_empty(self) -> bool:
        return not self.intervals

    def is_bounded(self) -> bool:
        return all(iv.lo is not None and iv.hi is not None for iv in self.intervals)

    def contains(self, q) -> bool:
        q = as_fraction(q)
        return any(iv.contains(q) for iv in self.intervals)

    def hull(self) -> Interval:
        if not self.intervals:
            raise ValueError("hull of the empty set")
        a, b = self.intervals[0], self.intervals[-1]
        return Interval(a.lo, b.hi, a.lo_closed, b.hi_closed)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(self.intervals + other.intervals)

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        a, b = self.intervals, other.intervals
        i = j = 0
        while i < len(a) and j < len(b):
            lo, lo_c = _max_lo(a[i], b[j])
            hi, hi_c = _min_hi(a[i], b[j])
            out.append(Interval(lo, hi, lo_c, hi_c))
            # advance whichever interval ends first
            if _hi_greater(b[j], a[i]):
                i += 1
            else:
                j += 1
        return IntervalSet(out)

    def complement(self) -> "IntervalSet":
        out = []
        lo, lo_closed = None, False
        for iv in self.intervals:
            if iv.lo is not None:
                out.append(Interval(lo, iv.lo, lo_closed, not iv.lo_closed))
            if iv.hi is None:
                return IntervalSet(out)
            lo, lo_closed = iv.hi, not iv.hi_closed
        out.append(Interval(lo, None, lo_closed, False))
        return IntervalSet(out)

    def __eq__(self, other):
        return isinstance(other, IntervalSet) and self.intervals == other.intervals

    def __repr__(self):
        if not self.intervals:
            return "IntervalSet(empty)"
        return "IntervalSet(" + " u ".join(str(iv) for iv in self.intervals) + ")"


def _max_lo(a: Interval, b: Interval):
    if a.lo is None:
        return b.lo, b.lo_closed
    if b.lo is None:
        return a.lo, a.lo_closed
    if a.lo > b.lo:
        return a.lo, a.lo_closed
    if b.lo > a.lo:
        return b.lo, b.lo_closed
    return a.lo, a.lo_closed and b.lo_closed


def _min_hi(a: Interval, b: Interval):
    if a.hi is None:
        return b.hi, b.hi_closed
    if b.hi is None:
        return a.hi, a.hi_closed
    if a.hi < b.hi:
        return a.hi, a.hi_closed
    if b.hi < a.hi:
        return b.hi, b.hi_closed
    return a.hi, a.hi_closed and b.hi_closed


# ---------------------------------------------------------------------------
# Atoms as bounds on a single variable


@dataclass(frozen=True)
class ImpliedBound:
    """``z >= value`` (lower) or ``z <= value`` (upper) from an atom under alpha.

    ``atom`` is the normalized atom the bound was read from and ``source``
    the clause containing it.
    """

    variable: str
    lower: bool
    value: Fraction
    strict: bool
    atom: LinearAtom
    source: Optional[LinearClause] = None

    def allowed(self) -> Interval:
        if self.lower:
            return Interval(self.value, None, not self.strict, False)
        return Interval(None, self.value, False, not self.strict)


def _atom_bound(atom: LinearAtom, alpha: Assignment, z: str) -> ImpliedBound:
    """Solve a normalized atom ``a*z + r <rel> 0`` for ``z`` under ``alpha``."""
    a = Fraction(0)
    r = atom.constant
    for v, c in atom.coefficients:
        if v == z:
            a = c
        else:
            r += c * alpha[v]
    rel = atom.relation
    if rel in ("<", "<="):
        atom = atom.normalized()[0]
        a, r, rel = -a, -r, atom.relation
    elif rel not in (">", ">="):
        raise PreconditionError(f"atom {atom} is not normalized")
    value = -r / a
    return ImpliedBound(z, a > 0, value, rel == ">", atom)


def _clause_split(clause: LinearClause, alpha: Assignment, z: str):
    """Classify a clause under ``alpha`` with respect to ``z``.

    Returns ``None`` when the clause is True or does not restrict ``z``;
    otherwise ``(bounds, other_atoms)`` where every atom outside ``bounds``
    is False under ``alpha``.
    """
    bounds = []
    others = []
    for atom in clause.atoms:
        vs = atom.variables
        if z in vs:
            if any(v != z and v not in alpha for v in vs):
                return None
            bounds.append(_atom_bound(atom, alpha, z))
        else:
            t = atom.evaluate(alpha)
            if t is Truth.TRUE or t is Truth.UNKNOWN:
                return None
            others.append(atom)
    return bounds, others


def implied_bounds(linear: Iterable[LinearClause], alpha: Assignment, z: str) -> list[ImpliedBound]:
    """Bounds on ``z`` from clauses with every other atom False under ``alpha``."""
    out = []
    for clause in linear:
        split = _clause_split(clause, alpha, z)
        if split is None or len(split[0]) != 1:
            continue
        b = split[0][0]
        out.append(ImpliedBound(b.variable, b.lower, b.value, b.strict, b.atom, clause))
    return out


def feasible_set(linear: Iterable[LinearClause], alpha: Assignment, z: str) -> IntervalSet:
    """All ``q`` with the clause set not False under ``alpha :: z -> q``.

    Each clause whose other atoms are False forbids one interval of values;
    the feasible set is the complement of their union.
    """
    if z in alpha:
        raise PreconditionError(f"{z} is already assigned")
    return IntervalSet(f.interval for f in _forbidden_all(linear, alpha, z)).complement()


# ---------------------------------------------------------------------------
# Value selection


def _simplest_positive(lo: Fraction, lo_closed: bool, hi: Optional[Fraction], hi_closed: bool) -> Fraction:
    """Simplest rational in an interval with ``lo >= 0``."""
    n = lo.numerator // lo.denominator
    # smallest integer in the interval, if any
    cand = n if (lo_closed and n == lo) else n + 1
    if hi is None or cand < hi or (cand == hi and hi_closed):
        return Fraction(cand)
    # the interval lies within (n, n+1); recurse on reciprocals of the fractional part
    if lo == n:
        inv_hi, inv_hi_closed = None, False
    else:
        inv_hi, inv_hi_closed = 1 / (lo - n), lo_closed
    inv_lo, inv_lo_closed = 1 / (hi - n), hi_closed
    return n + 1 / _simplest_positive(inv_lo, inv_lo_closed, inv_hi, inv_hi_closed)


def _simplest_in(iv: Interval) -> Fraction:
    if iv.contains(Fraction(0)):
        return Fraction(0)
    if iv.lo is not None and iv.lo >= 0:
        return _simplest_positive(iv.lo, iv.lo_closed, iv.hi, iv.hi_closed)
    # interval entirely at or below zero: mirror
    lo = -iv.hi
    hi = None if iv.lo is None else -iv.lo
    return -_simplest_positive(lo, iv.hi_closed, hi, iv.lo_closed)


def _simplicity(q: Fraction):
    return (q.denominator, abs(q.numerator), q < 0)


def pick_value(s: IntervalSet) -> Fraction:
    """The simplest rational in ``s``.

    Minimal denominator, then minimal ``|numerator|``, then non-negative.
    """
    if s.is_empty():
        raise PreconditionError("no value in an empty set")
    best = None
    for iv in s.intervals:
        q = _simplest_in(iv)
        if best is None or _simplicity(q) < _simplicity(best):
            best = q
    return best


# ---------------------------------------------------------------------------
# Resolvents


@dataclass(frozen=True)
class _Forbidden:
    clause: LinearClause
    uppers: tuple[ImpliedBound, ...]  # atoms z <= b: the forbidden range lies above them
    lowers: tuple[ImpliedBound, ...]  # atoms z >= a: the forbidden range lies below them
    others: tuple[LinearAtom, ...]
    left: Optional[Fraction]
    left_closed: bool
    right: Optional[Fraction]
    right_closed: bool

    @property
    def interval(self) -> Interval:
        return Interval(self.left, self.right, self.left_closed, self.right_closed)


def _forbidden_all(linear: Iterable[LinearClause], alpha: Assignment, z: str) -> list["_Forbidden"]:
    out = []
    for clause in linear:
        split = _clause_split(clause, alpha, z)
        if split is None:
            continue
        bounds, others = split
        if not bounds:
            raise PreconditionError(f"clause {clause} is False under the assignment")
        out.append(_forbidden(clause, bounds, others))
    return out


def _forbidden(clause, bounds, others) -> _Forbidden:
    uppers = tuple(b for b in bounds if not b.lower)
    lowers = tuple(b for b in bounds if b.lower)
    left = None
    left_closed = False
    if uppers:
        left = max(b.value for b in uppers)
        # complement of z <= b is z > b (open); of z < b is z >= b (closed)
        left_closed = all(b.strict for b in uppers if b.value == left)
    right = None
    right_closed = False
    if lowers:
        right = min(b.value for b in lowers)
        right_closed = all(b.strict for b in lowers if b.value == right)
    return _Forbidden(clause, uppers, lowers, tuple(others), left, left_closed, right, right_closed)


def _reaches(reach: Optional[Fraction], reach_closed: bool, f: _Forbidden, started: bool) -> bool:
    """Does ``f`` start no later than the covered prefix ends?"""
    if not started:
        return f.left is None
    if f.left is None:
        return True
    if reach is None:
        return True
    if f.left < reach:
        return True
    return f.left == reach and (reach_closed or f.left_closed)


def _further(f: _Forbidden, g: Optional[_Forbidden]) -> bool:
    if g is None:
        return True
    if f.right is None:
        return g.right is not None
    if g.right is None:
        return False
    return f.right > g.right or (f.right == g.right and f.right_closed and not g.right_closed)


def _extends(f: _Forbidden, reach: Fraction, reach_closed: bool) -> bool:
    if f.right is None:
        return True
    return f.right > reach or (f.right == reach and f.right_closed and not reach_closed)


def _link_negation(lower: ImpliedBound, upper: ImpliedBound, z: str) -> LinearAtom:
    """Atom stating that the complements of two bounds fail to overlap.

    ``lower`` reads ``z >= a(x)`` and ``upper`` reads ``z <= b(x)``; both
    cannot hold when ``b < a`` (or ``b <= a`` if either is strict).  The
    negation of that condition is returned as a z-free atom ``b - a >= 0``
    (or ``> 0``).
    """

    def solved(atom: LinearAtom):
        c = atom.coefficient(z)
        const = -atom.constant / c
        coeffs = {v: -k / c for v, k in atom.coefficients if v != z}
        return const, coeffs

    ca, fa = solved(lower.atom)
    cb, fb = solved(upper.atom)
    coeffs = dict(fb)
    for v, k in fa.items():
        coeffs[v] = coeffs.get(v, 0) - k
    rel = ">" if (lower.strict or upper.strict) else ">="
    return LinearAtom.make(cb - ca, {v: k for v, k in coeffs.items() if k}, rel)


def resolvent(linear: Sequence[LinearClause], alpha: Assignment, z: str) -> list[LinearClause]:
    """Clauses without ``z``, implied by ``linear`` and False under ``alpha``.

    Each relevant clause forbids an interval of values for ``z``.  When the
    feasible set is empty these intervals cover the line; a chain of them
    from -inf to +inf is selected and one clause is formed from the atoms
    of the chain that do not mention ``z`` plus, for every consecutive pair,
    the eliminated combination of their bounds.  With unit bounds this is
    Fourier-Motzkin elimination of ``z``.
    """
    if z in alpha:
        raise PreconditionError(f"{z} is already assigned")
    forb = sorted(_forbidden_all(linear, alpha, z), key=lambda f: _lo_key(f.interval))
    # greedy cover of the line by forbidden intervals, scanning by left end
    chain: list[_Forbidden] = []
    reach: Optional[Fraction] = None
    reach_closed = False
    i = 0
    while True:
        best = None
        while i < len(forb) and _reaches(reach, reach_closed, forb[i], bool(chain)):
            if _further(forb[i], best):
                best = forb[i]
            i += 1
        if best is None or (chain and not _extends(best, reach, reach_closed)):
            raise PreconditionError(f"values of {z} are not all excluded")
        chain.append(best)
        if best.right is None:
            break
        reach, reach_closed = best.right, best.right_closed

    atoms: list[LinearAtom] = []
    for f in chain:
        atoms.extend(f.others)
    for prev, nxt in zip(chain, chain[1:]):
        for lo in prev.lowers:
            for up in nxt.uppers:
                atoms.append(_link_negation(lo, up, z))
    # atoms without variables are False here; one is kept if nothing else remains
    kept = [a for a in atoms if a.variables]
    if not kept:
        kept = [min(atoms, key=lambda a: (a.constant, a.relation))] if atoms else [LinearAtom.make(-1, {}, ">=")]
    clause = LinearClause(tuple(kept))
    if clause.evaluate(alpha) is not Truth.FALSE:
        raise AssertionError(f"resolvent {clause} is not False under {alpha}")
    return [clause]


# ---------------------------------------------------------------------------
# Backjumping


def false_level(clause: LinearClause, alpha: Assignment) -> Optional[int]:
    """Shortest trail prefix length under which ``clause`` is False, if any."""
    if clause.evaluate(alpha) is not Truth.FALSE:
        return None
    pos = {v: i for i, (v, _) in enumerate(alpha.trail)}
    level = 0
    for atom in clause.atoms:
        for v in atom.variables:
            level = max(level, pos[v] + 1)
    return level


def backjump_prefix(linear: Iterable[LinearClause], alpha: Assignment) -> Assignment:
    """Longest prefix of ``alpha`` under which ``linear`` is not False.

    Returns the empty assignment when the clauses are False already under
    the empty assignment.
    """
    levels = [lv for lv in (false_level(c, alpha) for c in linear) if lv is not None]
    if not levels:
        raise PreconditionError("the clause set is not False under the assignment")
    return alpha.prefix(max(0, min(levels) - 1))
