"""Clebsch-Gordan coefficients and Wigner 3j, 6j and 9j symbols.

Arguments may be integers, half-integers given as floats (``0.5``) or
:class:`fractions.Fraction`.  Internally every angular momentum is handled
as twice its value so that half-integers stay exact.  The Racah sums are
evaluated with exact rational arithmetic and converted to float only once,
which keeps orthogonality relations at the level of machine precision.

Non-triangular or otherwise invalid arguments give 0 instead of raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

__all__ = [
    "HalfInt",
    "triangle",
    "clebsch_gordan",
    "wigner3j",
    "wigner6j",
    "wigner9j",
]


@dataclass(frozen=True, order=True)
class HalfInt:
    """An exact integer or half-integer, stored as ``twice_value``."""

    twice_value: int

    @classmethod
    def of(cls, x) -> "HalfInt":
        if isinstance(x, HalfInt):
            return x
        return cls(_twice(x))

    def __float__(self) -> float:
        return self.twice_value / 2

    def __repr__(self) -> str:
        t = self.twice_value
        return f"HalfInt({t // 2})" if t % 2 == 0 else f"HalfInt({t}/2)"


def _twice(x) -> int:
    if isinstance(x, HalfInt):
        return x.twice_value
    if isinstance(x, int):
        return 2 * x
    t = 2 * Fraction(x)
    if t.denominator != 1:
        raise ValueError(f"{x!r} is not an integer or half-integer")
    return int(t)


def _tri2(a: int, b: int, c: int) -> bool:
    """Triangle condition on doubled arguments."""
    return (
        a >= 0
        and b >= 0
        and c >= 0
        and (a + b + c) % 2 == 0
        and abs(a - b) <= c <= a + b
    )


def triangle(a, b, c) -> bool:
    """True when |a-b| <= c <= a+b and a+b+c is an integer."""
    return _tri2(_twice(a), _twice(b), _twice(c))


_fact = math.factorial


def _delta_sq(a: int, b: int, c: int) -> Fraction:
    # doubled arguments; triangle already checked
    return Fraction(
        _fact((a + b - c) // 2) * _fact((a - b + c) // 2) * _fact((-a + b + c) // 2),
        _fact((a + b + c) // 2 + 1),
    )


def _signed_sqrt(sign: int, sq: Fraction) -> float:
    if sq == 0:
        return 0.0
    # sqrt of numerator and denominator separately avoids float overflow
    return sign * math.sqrt(sq.numerator) / math.sqrt(sq.denominator)


@lru_cache(maxsize=65536)
def _threej_exact(j1, j2, j3, m1, m2, m3) -> tuple[int, Fraction]:
    """Return (sign, value**2) of the 3j symbol; arguments doubled."""
    if m1 + m2 + m3 != 0:
        return 1, Fraction(0)
    if not _tri2(j1, j2, j3):
        return 1, Fraction(0)
    for j, m in ((j1, m1), (j2, m2), (j3, m3)):
        if abs(m) > j or (j + m) % 2:
            return 1, Fraction(0)
    pre = _delta_sq(j1, j2, j3) * (
        _fact((j1 + m1) // 2)
        * _fact((j1 - m1) // 2)
        * _fact((j2 + m2) // 2)
        * _fact((j2 - m2) // 2)
        * _fact((j3 + m3) // 2)
        * _fact((j3 - m3) // 2)
    )
    kmin = max(0, (j2 - j3 - m1) // 2, (j1 - j3 + m2) // 2)
    kmax = min((j1 + j2 - j3) // 2, (j1 - m1) // 2, (j2 + m2) // 2)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (
            _fact(k)
            * _fact((j3 - j2 + m1) // 2 + k)
            * _fact((j3 - j1 - m2) // 2 + k)
            * _fact((j1 + j2 - j3) // 2 - k)
            * _fact((j1 - m1) // 2 - k)
            * _fact((j2 + m2) // 2 - k)
        )
        total += Fraction((-1) ** k, den)
    if total == 0:
        return 1, Fraction(0)
    sign = 1 if total > 0 else -1
    if ((j1 - j2 - m3) // 2) % 2:
        sign = -sign
    return sign, pre * total * total


def wigner3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol (j1 j2 j3; m1 m2 m3)."""
    s, sq = _threej_exact(
        _twice(j1), _twice(j2), _twice(j3), _twice(m1), _twice(m2), _twice(m3)
    )
    return _signed_sqrt(s, sq)


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """Condon-Shortley coefficient <j1 m1; j2 m2 | J M>."""
    a, b, c = _twice(j1), _twice(j2), _twice(J)
    ma, mb, mc = _twice(m1), _twice(m2), _twice(M)
    if ma + mb != mc:
        return 0.0
    s, sq = _threej_exact(a, b, c, ma, mb, -mc)
    if sq == 0:
        return 0.0
    # <j1 m1 j2 m2|J M> = (-1)^(j1-j2+M) sqrt(2J+1) (j1 j2 J; m1 m2 -M)
    if ((a - b + mc) // 2) % 2:
        s = -s
    return _signed_sqrt(s, sq * (c + 1))


@lru_cache(maxsize=65536)
def _sixj_exact(a, b, c, d, e, f) -> tuple[int, Fraction]:
    """Return (sign, value**2) of {a b c; d e f}; arguments doubled."""
    triads = ((a, b, c), (a, e, f), (d, b, f), (d, e, c))
    if not all(_tri2(*t) for t in triads):
        return 1, Fraction(0)
    pre = Fraction(1)
    for t in triads:
        pre *= _delta_sq(*t)
    s1 = (a + b + c) // 2
    s2 = (a + e + f) // 2
    s3 = (d + b + f) // 2
    s4 = (d + e + c) // 2
    p1 = (a + b + d + e) // 2
    p2 = (a + c + d + f) // 2
    p3 = (b + c + e + f) // 2
    total = Fraction(0)
    for t in range(max(s1, s2, s3, s4), min(p1, p2, p3) + 1):
        den = (
            _fact(t - s1)
            * _fact(t - s2)
            * _fact(t - s3)
            * _fact(t - s4)
            * _fact(p1 - t)
            * _fact(p2 - t)
            * _fact(p3 - t)
        )
        total += Fraction((-1) ** t * _fact(t + 1), den)
    if total == 0:
        return 1, Fraction(0)
    sign = 1 if total > 0 else -1
    return sign, pre * total * total


def wigner6j(j1, j2, j3, j4, j5, j6) -> float:
    """Wigner 6j symbol {j1 j2 j3; j4 j5 j6}."""
    s, sq = _sixj_exact(*(_twice(x) for x in (j1, j2, j3, j4, j5, j6)))
    return _signed_sqrt(s, sq)


@lru_cache(maxsize=16384)
def _ninej(a, b, c, d, e, f, g, h, i) -> float:
    rows = ((a, b, c), (d, e, f), (g, h, i))
    cols = ((a, d, g), (b, e, h), (c, f, i))
    if not all(_tri2(*t) for t in rows + cols):
        return 0.0
    # {a b c; d e f; g h i} = sum_x (-1)^2x (2x+1) {a b c; f i x}{d e f; b x h}{g h i; x a d}
    lo = max(abs(a - i), abs(d - h), abs(b - f))
    hi = min(a + i, d + h, b + f)
    total = 0.0
    for x in range(lo, hi + 1, 2):
        s1, q1 = _sixj_exact(a, b, c, f, i, x)
        if q1 == 0:
            continue
        s2, q2 = _sixj_exact(d, e, f, b, x, h)
        if q2 == 0:
            continue
        s3, q3 = _sixj_exact(g, h, i, x, a, d)
        if q3 == 0:
            continue
        sign = s1 * s2 * s3 * (-1 if x % 2 else 1)
        total += _signed_sqrt(sign, q1 * q2 * q3) * (x + 1)
    return total


def wigner9j(j1, j2, j3, j4, j5, j6, j7, j8, j9) -> float:
    """Wigner 9j symbol {j1 j2 j3; j4 j5 j6; j7 j8 j9}."""
    return _ninej(*(_twice(x) for x in (j1, j2, j3, j4, j5, j6, j7, j8, j9)))
