"""Dyadic interval evaluation of terms, emulating function-oracle machines.

Intervals are evaluated in fixed point: a pair of integers ``(lo, hi)`` at
scale ``w`` stands for ``[lo / 2**w, hi / 2**w]``.  Every operation rounds
outward, so the result always encloses the exact range of the term.

Elementary functions are computed from Taylor/atanh series on Python
integers with explicit error budgets counted in units of the last place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Mapping, Optional, Sequence, Union

from .core import (
    BinOp,
    Const,
    Dyadic,
    Func,
    Neg,
    Pow,
    Term,
    Var,
    add,
    as_fraction,
    const,
    div,
    func,
    mul,
    neg,
    pow_,
    sub,
)

DEFAULT_MAX_PRECISION = 600


class DomainError(ArithmeticError):
    """The enclosure of an argument leaves the domain of an operation."""


class EvaluationFailure(RuntimeError):
    """The oracle machine could not reach the requested accuracy."""


class ModulusError(RuntimeError):
    """No uniform modulus of continuity could be derived."""


# ---------------------------------------------------------------------------
# Integer helpers


def _cdiv(a: int, b: int) -> int:
    return -((-a) // b)


def _tdiv(a: int, b: int) -> int:
    """Division truncating toward zero (b > 0)."""
    return a // b if a >= 0 else -((-a) // b)


def _shr_floor(a: int, s: int) -> int:
    return a >> s if s >= 0 else a << -s


def _shr_ceil(a: int, s: int) -> int:
    return -((-a) >> s) if s >= 0 else a << -s


def _fx_floor(q: Fraction, w: int) -> int:
    return (q.numerator << w) // q.denominator


def _fx_ceil(q: Fraction, w: int) -> int:
    return _cdiv(q.numerator << w, q.denominator)


def floor_log2(q: Fraction) -> int:
    """Exact ``floor(log2(q))`` for rational ``q > 0``."""
    q = as_fraction(q)
    if q <= 0:
        raise ValueError("log2 of a non-positive number")
    a, b = q.numerator, q.denominator
    e = a.bit_length() - b.bit_length()
    ok = a >= (b << e) if e >= 0 else (a << -e) >= b
    return e if ok else e - 1


def ceil_log2(q: Fraction) -> int:
    e = floor_log2(q)
    return e if Fraction(2) ** e == q else e + 1


# ---------------------------------------------------------------------------
# Constants


def _atan_inv(q: int, W: int) -> tuple[int, int]:
    """atan(1/q) at scale W, with an error bound in ulps."""
    x = (1 << W) // q
    q2 = q * q
    total = x
    k = 1
    n = 1
    while x:
        x //= q2
        term = x // (2 * k + 1)
        total += -term if k % 2 else term
        k += 1
        n += 1
    return total, 3 * n + 2


@lru_cache(maxsize=64)
def _pi_fx_exact(W: int) -> tuple[int, int]:
    a, ea = _atan_inv(5, W)
    b, eb = _atan_inv(239, W)
    return 16 * a - 4 * b, 16 * ea + 4 * eb


def pi_fx(w: int) -> tuple[int, int]:
    """Enclosure of pi at scale ``w``."""
    g = 16
    W = ((w + g + 31) // 32) * 32
    val, err = _pi_fx_exact(W)
    s = W - w
    return (val - err) >> s, _shr_ceil(val + err, s)


def _atanh_fx(p: int, q: int, W: int) -> tuple[int, int]:
    """atanh(p/q) at scale W for |p/q| <= 1/2, with error in ulps."""
    sign = -1 if p < 0 else 1
    p = abs(p)
    x = (p << W) // q
    p2, q2 = p * p, q * q
    total = x
    k = 1
    n = 1
    while x:
        x = x * p2 // q2
        total += x // (2 * k + 1)
        k += 1
        n += 1
    return sign * total, 2 * n + 3


@lru_cache(maxsize=64)
def _ln2_exact(W: int) -> tuple[int, int]:
    v, e = _atanh_fx(1, 3, W)
    return 2 * v, 2 * e


def ln2_fx(w: int) -> tuple[int, int]:
    W = ((w + 16 + 31) // 32) * 32
    val, err = _ln2_exact(W)
    s = W - w
    return (val - err) >> s, _shr_ceil(val + err, s)


# ---------------------------------------------------------------------------
# Point evaluations (argument n / 2**w, result enclosure at scale w)


def _exp_point(n: int, w: int) -> tuple[int, int]:
    s = max(0, abs(n).bit_length() - w + 2)
    growth = 0
    if n > 0:
        growth = (n >> w) * 3 // 2 + 2
    W = w + s + growth + 24
    R = n << (W - w - s)
    one = 1 << W
    term = one
    total = one
    k = 1
    nterms = 1
    while term:
        term = _tdiv(term * R, k << W)
        total += term
        k += 1
        nterms += 1
    err = 2 * nterms + 3
    lo, hi = total - err, total + err
    for _ in range(s):
        lo = (lo * lo) >> W
        hi = _cdiv(hi * hi, one)
    return lo >> (W - w), _shr_ceil(hi, W - w)


def _log_point(n: int, w: int) -> tuple[int, int]:
    if n <= 0:
        raise DomainError("log of a non-positive number")
    b = n.bit_length()
    e = b - w
    W = w + 24 + abs(e).bit_length()
    v, err = _atanh_fx(n - (1 << b), n + (1 << b), W)
    v, err = 2 * v, 2 * err
    if e:
        l_lo, l_hi = ln2_fx(W)
        if e > 0:
            lo, hi = v - err + e * l_lo, v + err + e * l_hi
        else:
            lo, hi = v - err + e * l_hi, v + err + e * l_lo
    else:
        lo, hi = v - err, v + err
    return lo >> (W - w), _shr_ceil(hi, W - w)


def _sincos_point(n: int, w: int) -> tuple[tuple[int, int], tuple[int, int]]:
    extra = max(0, abs(n).bit_length() - w)
    W = w + 24 + extra
    X = n << (W - w)
    h_lo, h_hi = pi_fx(W - 1)  # pi/2 at scale W
    k = (2 * X + h_lo) // (2 * h_lo)
    if k >= 0:
        r_lo, r_hi = X - k * h_hi, X - k * h_lo
    else:
        r_lo, r_hi = X - k * h_lo, X - k * h_hi
    R = (r_lo + r_hi) // 2
    r_err = (r_hi - r_lo) // 2 + 1
    R2 = (R * R) >> W
    one = 1 << W
    # sine series
    term = R
    s_total = R
    j = 1
    ns = 1
    while term:
        term = -_tdiv(term * R2, (2 * j) * (2 * j + 1) << W)
        s_total += term
        j += 1
        ns += 1
    term = one
    c_total = one
    j = 1
    nc = 1
    while term:
        term = -_tdiv(term * R2, (2 * j - 1) * (2 * j) << W)
        c_total += term
        j += 1
        nc += 1
    s_err = 3 * ns + 3 + r_err
    c_err = 3 * nc + 3 + r_err
    s = (s_total - s_err, s_total + s_err)
    c = (c_total - c_err, c_total + c_err)
    ms = (-s[1], -s[0])
    mc = (-c[1], -c[0])
    q = k % 4
    sin_iv = (s, c, ms, mc)[q]
    cos_iv = (c, ms, mc, s)[q]
    shift = W - w
    lim = 1 << w

    def out(iv):
        lo = max(iv[0] >> shift, -lim)
        hi = min(_shr_ceil(iv[1], shift), lim)
        return lo, hi

    return out(sin_iv), out(cos_iv)


# ---------------------------------------------------------------------------
# Interval operations at scale w


def _iv_mul(a, b, w):
    p = (a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    return min(p) >> w, _shr_ceil(max(p), w)


def _iv_div(a, b, w):
    if b[0] <= 0 <= b[1]:
        raise DomainError("division by an interval containing zero")
    nums = (a[0] << w, a[1] << w)
    lo = min(x // y for x in nums for y in b)
    hi = max(-((-x) // y) for x in nums for y in b)
    return lo, hi


def _iv_pow_int(a, n, w):
    if n == 0:
        return 1 << w, 1 << w
    if n < 0:
        pos = _iv_pow_int(a, -n, w)
        return _iv_div((1 << w, 1 << w), pos, w)
    lo, hi = a
    if n % 2 == 1:
        return _shr_floor(lo**n, w * (n - 1)), _shr_ceil(hi**n, w * (n - 1))
    if lo >= 0:
        mig, mag = lo, hi
    elif hi <= 0:
        mig, mag = -hi, -lo
    else:
        mig, mag = 0, max(-lo, hi)
    return _shr_floor(mig**n, w * (n - 1)), _shr_ceil(mag**n, w * (n - 1))


def _iv_exp(a, w):
    return _exp_point(a[0], w)[0], _exp_point(a[1], w)[1]


def _iv_log(a, w):
    if a[0] <= 0:
        raise DomainError("log of an interval reaching zero or below")
    return _log_point(a[0], w)[0], _log_point(a[1], w)[1]


def _iv_sqrt(a, w, strict):
    lo, hi = a
    if hi < 0 or (strict and lo < 0):
        raise DomainError("sqrt of a negative interval")
    lo = max(lo, 0)
    s_lo = math.isqrt(lo << w)
    s_hi = math.isqrt(hi << w)
    if s_hi * s_hi != hi << w:
        s_hi += 1
    return s_lo, s_hi


def _iv_trig(a, w, which):
    lo, hi = a
    lim = 1 << w
    if hi - lo >= 2 * pi_fx(w)[0]:
        return -lim, lim
    pl = _sincos_point(lo, w)
    ph = _sincos_point(hi, w)
    idx = 0 if which == "sin" else 1
    r_lo = min(pl[idx][0], ph[idx][0])
    r_hi = max(pl[idx][1], ph[idx][1])
    # extrema of sin at m*pi/2 with m = 1 (max), 3 (min) mod 4; cos at 0, 2.
    # Locate them with pi at a scale fine enough that m*pi stays accurate.
    extra = max(abs(lo).bit_length(), abs(hi).bit_length()) - w + 8
    W = w + max(8, extra)
    sh = W - w
    lo_W, hi_W = lo << sh, hi << sh
    p_lo, p_hi = pi_fx(W)
    max_res, min_res = (1, 3) if which == "sin" else (0, 2)
    m_min = min((2 * lo_W) // p_lo, (2 * lo_W) // p_hi) - 1
    m_max = max(_cdiv(2 * hi_W, p_lo), _cdiv(2 * hi_W, p_hi)) + 1
    for m in range(m_min, m_max + 1):
        res = m % 4
        if res not in (max_res, min_res):
            continue
        if m >= 0:
            c_lo, c_hi = (m * p_lo) >> 1, _cdiv(m * p_hi, 2)
        else:
            c_lo, c_hi = (m * p_hi) >> 1, _cdiv(m * p_lo, 2)
        if c_hi < lo_W or c_lo > hi_W:
            continue
        if res == max_res:
            r_hi = lim
        else:
            r_lo = -lim
    return max(r_lo, -lim), min(r_hi, lim)


def _enclose_fx(t: Term, env: Mapping[str, tuple[int, int]], w: int, strict: bool) -> tuple[int, int]:
    if isinstance(t, Var):
        return env[t.name]
    if isinstance(t, Const):
        return _fx_floor(t.value, w), _fx_ceil(t.value, w)
    if isinstance(t, Neg):
        a = _enclose_fx(t.arg, env, w, strict)
        return -a[1], -a[0]
    if isinstance(t, BinOp):
        a = _enclose_fx(t.left, env, w, strict)
        b = _enclose_fx(t.right, env, w, strict)
        op = t.op
        if op == "+":
            return a[0] + b[0], a[1] + b[1]
        if op == "-":
            return a[0] - b[1], a[1] - b[0]
        if op == "*":
            return _iv_mul(a, b, w)
        return _iv_div(a, b, w)
    if isinstance(t, Func):
        a = _enclose_fx(t.arg, env, w, strict)
        name = t.name
        if name == "exp":
            return _iv_exp(a, w)
        if name == "log":
            return _iv_log(a, w)
        if name == "sqrt":
            return _iv_sqrt(a, w, strict)
        return _iv_trig(a, w, name)
    if isinstance(t, Pow):
        e = t.exponent
        if isinstance(e, Const) and e.value.denominator == 1:
            a = _enclose_fx(t.base, env, w, strict)
            return _iv_pow_int(a, e.value.numerator, w)
        a = _enclose_fx(t.base, env, w, strict)
        b = _enclose_fx(e, env, w, strict)
        return _iv_exp(_iv_mul(b, _iv_log(a, w), w), w)
    raise TypeError(f"cannot evaluate {t!r}")


# ---------------------------------------------------------------------------
# Public interval type and enclosure API


@dataclass(frozen=True)
class DyadicInterval:
    lo: Dyadic
    hi: Dyadic

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("empty interval")

    @classmethod
    def from_scaled(cls, lo: int, hi: int, w: int) -> "DyadicInterval":
        return cls(Dyadic(lo, -w), Dyadic(hi, -w))

    @property
    def width(self) -> Fraction:
        return self.hi.to_fraction() - self.lo.to_fraction()

    def midpoint(self) -> Dyadic:
        return Dyadic((self.lo + self.hi).mantissa, (self.lo + self.hi).exponent - 1)

    def contains(self, q) -> bool:
        q = as_fraction(q)
        return self.lo.to_fraction() <= q <= self.hi.to_fraction()

    def __str__(self):
        return f"[{self.lo}, {self.hi}]"


Box = Mapping[str, tuple[Fraction, Fraction]]


def _box_fx(box: Box, w: int) -> dict[str, tuple[int, int]]:
    return {v: (_fx_floor(as_fraction(lo), w), _fx_ceil(as_fraction(hi), w)) for v, (lo, hi) in box.items()}


def enclose(t: Term, box: Box, w: int = 64, strict: bool = False) -> DyadicInterval:
    """Enclosure of the range of ``t`` over a rational box.

    With ``strict`` set, any part of an argument enclosure outside the
    domain of an operation raises :class:`DomainError`.
    """
    lo, hi = _enclose_fx(t, _box_fx(box, w), w, strict)
    return DyadicInterval.from_scaled(lo, hi, w)


def enclose_point(t: Term, point: Mapping[str, Fraction], w: int = 64) -> DyadicInterval:
    return enclose(t, {v: (q, q) for v, q in point.items()}, w)


def enclose_fractions(t: Term, box: Box, w: int = 64, strict: bool = False) -> tuple[Fraction, Fraction]:
    iv = enclose(t, box, w, strict)
    return iv.lo.to_fraction(), iv.hi.to_fraction()


def certify_sign(t: Term, point: Mapping[str, Fraction], relation: str, w: int = 64) -> Optional[bool]:
    """Decide ``t(point) <relation> 0`` from an enclosure; ``None`` if undecided."""
    try:
        lo, hi = enclose_fractions(t, {v: (q, q) for v, q in point.items()}, w, strict=True)
    except (DomainError, ZeroDivisionError):
        return None
    if relation == ">=":
        if lo >= 0:
            return True
        if hi < 0:
            return False
    elif relation == ">":
        if lo > 0:
            return True
        if hi <= 0:
            return False
    else:
        raise ValueError(relation)
    return None


# ---------------------------------------------------------------------------
# Names


Vector = tuple[Fraction, ...]


class Name:
    """A sequence ``k -> approximation`` of a fixed real vector.

    The generator must be referentially transparent; results are memoised.
    """

    def __init__(self, generator: Callable[[int], Union[Fraction, Sequence[Fraction]]]):
        self._gen = generator
        self._cache: dict[int, object] = {}

    def __call__(self, k: int):
        if k < 0:
            raise ValueError("names are indexed by natural numbers")
        try:
            return self._cache[k]
        except KeyError:
            v = self._gen(k)
            if not isinstance(v, Fraction) and not isinstance(v, int):
                v = tuple(as_fraction(c) for c in v)
            else:
                v = as_fraction(v)
            self._cache[k] = v
            return v

    def vector(self, k: int) -> Vector:
        v = self(k)
        return v if isinstance(v, tuple) else (v,)


class XiName(Name):
    """A name whose k-th entry lies on the grid ``Z * 2**-(k+1)``."""


def constant_name(x) -> Name:
    if isinstance(x, (Fraction, int)):
        q = as_fraction(x)
        return Name(lambda k: q)
    v = tuple(as_fraction(c) for c in x)
    return Name(lambda k: v)


def _round_half_even(q: Fraction) -> int:
    return round(q)


def approx(x, m: int):
    """Round ``x`` (scalar or vector) to the grid ``Z * 2**-(m+1)``."""
    if m < 0:
        raise ValueError("m must be a natural number")
    scale = 1 << (m + 1)
    if isinstance(x, (Fraction, int)):
        return Fraction(_round_half_even(as_fraction(x) * scale), scale)
    return tuple(Fraction(_round_half_even(as_fraction(c) * scale), scale) for c in x)


def xi_name_of(x) -> XiName:
    """The xi-name ``m -> approx(x, m)`` of a rational (vector)."""
    if isinstance(x, (Fraction, int)):
        q = as_fraction(x)
        return XiName(lambda m: approx(q, m))
    v = tuple(as_fraction(c) for c in x)
    return XiName(lambda m: approx(v, m))


def cauchy_to_xi(phi: Name) -> XiName:
    """Convert a Cauchy name into a xi-name of the same real."""

    def gen(n: int):
        src = phi(n + 4)
        scale = 1 << (n + 1)
        if isinstance(src, tuple):
            return tuple(Fraction(_round_half_even(c * scale), scale) for c in src)
        return Fraction(_round_half_even(src * scale), scale)

    return XiName(gen)


def on_grid(q: Fraction, k: int) -> bool:
    return (1 << (k + 1)) % as_fraction(q).denominator == 0


def is_xi_prefix(phi: Name, n: int) -> bool:
    """Check the xi-name conditions on indices ``0..n``."""
    vals = [phi.vector(k) for k in range(n + 1)]
    for k, v in enumerate(vals):
        if not all(on_grid(c, k) for c in v):
            return False
    for i in range(n + 1):
        bound = Fraction(1, 1 << (i + 1))
        for j in range(i, n + 1):
            if max(abs(a - b) for a, b in zip(vals[i], vals[j])) > bound:
                return False
    return True


# ---------------------------------------------------------------------------
# The oracle machine


@dataclass(frozen=True)
class EvalResult:
    value: Dyadic
    max_query: int
    enclosure: DyadicInterval


def _term_size(t: Term) -> int:
    return 1 + sum(_term_size(c) for c in t.children())


def eval_machine(
    f: Term,
    phi: Name,
    p: int,
    variables: Optional[Sequence[str]] = None,
    max_query: Optional[int] = None,
) -> EvalResult:
    """Approximate ``f`` at the real named by ``phi`` to within ``2**-p``.

    ``phi(k)`` yields a vector ordered like ``variables`` (default: the
    sorted variables of ``f``).  Queries start at ``k = max(2, p)`` and rise
    one index at a time; at index ``k`` the term is enclosed over the box
    ``phi(k) +- 2**(1-k)``, which contains the named point and every point
    within ``2**-k`` of it.  The returned ``max_query`` is the largest index
    consumed, or 0 if ``f`` needs no argument.
    """
    if p < 0:
        raise ValueError("precision must be a natural number")
    names = tuple(variables) if variables is not None else tuple(sorted(f.variables()))
    used = f.variables()
    missing = used - set(names)
    if missing:
        raise ValueError(f"name does not cover variables {sorted(missing)}")
    guard = 8 + _term_size(f).bit_length()
    cap = DEFAULT_MAX_PRECISION if max_query is None else max_query

    if not used:
        w = p + guard
        while w <= p + guard + cap:
            try:
                lo, hi = _enclose_fx(f, {}, w, False)
            except DomainError as exc:
                raise EvaluationFailure(str(exc)) from exc
            if hi - lo <= 1 << (w - p):
                return EvalResult(Dyadic(lo + hi, -(w + 1)), 0, DyadicInterval.from_scaled(lo, hi, w))
            w += 16
        raise EvaluationFailure(f"constant term {f} did not converge")

    idx = [i for i, v in enumerate(names) if v in used]
    k = max(2, p)
    last_error = "query cap reached"
    while k <= cap:
        vec = phi.vector(k)
        w = k + guard
        rad = Fraction(2) ** (1 - k)
        env = {}
        for i in idx:
            c = vec[i]
            env[names[i]] = (_fx_floor(c - rad, w), _fx_ceil(c + rad, w))
        try:
            lo, hi = _enclose_fx(f, env, w, False)
        except DomainError as exc:
            last_error = str(exc)
        else:
            if hi - lo <= 1 << (w - p):
                return EvalResult(Dyadic(lo + hi, -(w + 1)), k, DyadicInterval.from_scaled(lo, hi, w))
        k += 1
    raise EvaluationFailure(f"no {p}-approximation of {f} up to query {cap}: {last_error}")


# ---------------------------------------------------------------------------
# Moduli of continuity


def derivative(t: Term, x: str) -> Term:
    """Symbolic partial derivative, folded through the core builders."""
    if isinstance(t, Var):
        return const(1 if t.name == x else 0)
    if isinstance(t, Const):
        return const(0)
    if isinstance(t, Neg):
        return neg(derivative(t.arg, x))
    if isinstance(t, BinOp):
        a, b = t.left, t.right
        da, db = derivative(a, x), derivative(b, x)
        if t.op == "+":
            return add(da, db)
        if t.op == "-":
            return sub(da, db)
        if t.op == "*":
            return add(mul(da, b), mul(a, db))
        return div(sub(mul(da, b), mul(a, db)), pow_(b, const(2)))
    if isinstance(t, Func):
        a = t.arg
        da = derivative(a, x)
        if t.name == "sin":
            return mul(func("cos", a), da)
        if t.name == "cos":
            return neg(mul(func("sin", a), da))
        if t.name == "exp":
            return mul(t, da)
        if t.name == "log":
            return div(da, a)
        return div(da, mul(const(2), t))
    if isinstance(t, Pow):
        b, e = t.base, t.exponent
        if isinstance(e, Const):
            return mul(mul(e, pow_(b, const(e.value - 1))), derivative(b, x))
        # b**e = exp(e log b)
        inner = add(mul(derivative(e, x), func("log", b)), div(mul(e, derivative(b, x)), b))
        return mul(t, inner)
    raise TypeError(f"cannot differentiate {t!r}")


@dataclass(frozen=True)
class Modulus:
    """``mu(k) = k + shift`` (or 0 everywhere for constant functions)."""

    lipschitz: Fraction
    shift: int

    def __call__(self, k: int) -> int:
        if self.lipschitz == 0:
            return 0
        return k + self.shift


def uniform_modulus(f: Term, box: Box, w: int = 40) -> Modulus:
    """A uniform modulus of ``f`` on the closed box, from a Lipschitz bound.

    The bound is ``n * max_i sup |df/dx_i|`` with the suprema taken from
    interval enclosures of the symbolic partial derivatives.
    """
    vs = sorted(f.variables())
    if not vs:
        return Modulus(Fraction(0), 0)
    for v in vs:
        if v not in box:
            raise ModulusError(f"no bounds for {v}")
        lo, hi = box[v]
        if lo is None or hi is None:
            raise ModulusError(f"{v} is unbounded")
    sub_box = {v: box[v] for v in vs}
    sup = Fraction(0)
    for v in vs:
        d = derivative(f, v)
        try:
            lo, hi = enclose_fractions(d, sub_box, w, strict=True)
        except DomainError as exc:
            raise ModulusError(f"derivative of {f} is unbounded on the box: {exc}") from exc
        sup = max(sup, abs(lo), abs(hi))
    lip = len(vs) * sup
    if lip == 0:
        return Modulus(Fraction(0), 0)
    return Modulus(lip, max(0, ceil_log2(lip)))


def p_of_delta(delta) -> int:
    """Least natural ``p`` with ``p >= -floor(log2(min(1, delta/4)))``."""
    delta = as_fraction(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    return -floor_log2(min(Fraction(1), delta / 4))
