"""Rational parsing/formatting and certified bounds for irrational constants."""
from __future__ import annotations

from fractions import Fraction
from numbers import Rational

import mpmath

from .errors import ParameterError

_IV_PREC = 120


def as_fraction(x) -> Fraction:
    """Coerce ints, Fractions, decimal strings and ``"a/b"`` strings to Fraction.

    Floats are accepted only when they are exactly representable integers or
    dyadics; they are converted exactly, never rounded.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise ParameterError("booleans are not rationals")
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ParameterError(f"not a rational: {x!r}") from exc
    raise ParameterError(f"not a rational: {x!r}")


def fmt(x) -> str:
    """Serialize a rational as ``"a/b"`` (or ``"a"`` for integers)."""
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def _endpoint(raw) -> Fraction:
    sign, man, exp, _ = raw
    if not man:
        return Fraction(0)
    v = Fraction(int(man)) * (Fraction(2) ** exp)
    return -v if sign else v


class Interval:
    """Closed rational interval [lo, hi] from outward-rounded interval arithmetic."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: Fraction, hi: Fraction):
        if lo > hi:
            raise ValueError("empty interval")
        self.lo = lo
        self.hi = hi

    @classmethod
    def _from_iv(cls, v) -> "Interval":
        lo, hi = v._mpi_
        return cls(_endpoint(lo), _endpoint(hi))

    @classmethod
    def exact(cls, x) -> "Interval":
        x = Fraction(x)
        return cls(x, x)

    def __add__(self, other):
        other = _lift(other)
        return Interval(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __sub__(self, other):
        other = _lift(other)
        return Interval(self.lo - other.hi, self.hi - other.lo)

    def __rsub__(self, other):
        return _lift(other) - self

    def __mul__(self, other):
        other = _lift(other)
        c = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        return Interval(min(c), max(c))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _lift(other)
        if other.lo <= 0 <= other.hi:
            raise ZeroDivisionError("interval division by an interval containing 0")
        return self * Interval(1 / other.hi, 1 / other.lo)

    def __rtruediv__(self, other):
        return _lift(other) / self

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only nonnegative integer powers")
        out = Interval.exact(1)
        for _ in range(k):
            out = out * self
        return out

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def __repr__(self):
        return f"Interval({float(self.lo)!r}, {float(self.hi)!r})"


def _lift(x) -> Interval:
    return x if isinstance(x, Interval) else Interval.exact(x)


def _iv(x: Fraction):
    ctx = mpmath.iv
    x = Fraction(x)
    return ctx.mpf(x.numerator) / ctx.mpf(x.denominator)


def ln(x) -> Interval:
    """Certified enclosure of ln(x) for rational x > 0."""
    x = Fraction(x)
    if x <= 0:
        raise ParameterError("ln of a nonpositive number")
    if x == 1:
        return Interval.exact(0)
    with mpmath.workprec(_IV_PREC):
        old = mpmath.iv.prec
        mpmath.iv.prec = _IV_PREC
        try:
            return Interval._from_iv(mpmath.iv.log(_iv(x)))
        finally:
            mpmath.iv.prec = old


def power(base, exponent: Interval | Fraction) -> Interval:
    """Certified enclosure of base**exponent for rational base > 0."""
    base = Fraction(base)
    if base <= 0:
        raise ParameterError("power of a nonpositive base")
    e = _lift(exponent)
    old = mpmath.iv.prec
    mpmath.iv.prec = _IV_PREC
    try:
        iv = mpmath.iv
        ev = iv.mpf([_iv(e.lo).a, _iv(e.hi).b])
        return Interval._from_iv(iv.exp(iv.log(_iv(base)) * ev))
    finally:
        mpmath.iv.prec = old


LN2 = ln(2)


def log2(x) -> Interval:
    return ln(x) / LN2


def verdict(lhs, rhs) -> str:
    """Compare exact lhs against a possibly-interval rhs for ``lhs <= rhs``.

    Returns ``"pass"``, ``"fail"`` or ``"inconclusive"``. A pass is only
    issued when lhs is at most the rounded-down rhs.
    """
    r = _lift(rhs)
    lhs = Fraction(lhs)
    if lhs <= r.lo:
        return "pass"
    if lhs > r.hi:
        return "fail"
    return "inconclusive"
