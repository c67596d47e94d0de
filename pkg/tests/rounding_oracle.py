"""Exact-rational rounding to p significand bits, ties to even.

Independent of MPFR: works on ``fractions.Fraction`` and integer bit
manipulation only.
"""

from __future__ import annotations

from fractions import Fraction


def round_to_bits(x: Fraction, p: int) -> Fraction:
    """Nearest value with a p-bit significand (unbounded exponent), ties to even."""
    if x == 0:
        return Fraction(0)
    sign = -1 if x < 0 else 1
    x = abs(x)
    # find e with 2**(p-1) <= x / 2**e < 2**p
    e = x.numerator.bit_length() - x.denominator.bit_length() - p
    while x / Fraction(2) ** e >= 2**p:
        e += 1
    while x / Fraction(2) ** e < 2 ** (p - 1):
        e -= 1
    scaled = x / Fraction(2) ** e
    q, r = divmod(scaled.numerator, scaled.denominator)
    twice = 2 * r
    if twice > scaled.denominator or (twice == scaled.denominator and q % 2 == 1):
        q += 1
    return sign * Fraction(q) * Fraction(2) ** e


def isqrt_rounded(x: Fraction, p: int) -> Fraction:
    """sqrt(x) rounded to p bits, ties to even (a tie cannot occur for sqrt)."""
    if x < 0:
        raise ValueError("negative")
    if x == 0:
        return Fraction(0)
    # scale so the integer square root carries p + 2 guard bits
    e = (x.numerator.bit_length() - x.denominator.bit_length()) // 2 - p - 2
    scale = Fraction(2) ** (-2 * e)
    y = x * scale  # sqrt(x) = sqrt(y) * 2**e
    n = y.numerator * y.denominator  # sqrt(y) = sqrt(n) / den
    from math import isqrt

    # bracket sqrt(n)/den with enough bits, then round the exact bracket
    extra = 2 * (p + 8)
    root = isqrt(n << extra)
    exact_sq = root * root == (n << extra)
    approx = Fraction(root, y.denominator << (extra // 2)) * Fraction(2) ** e
    if exact_sq:
        return round_to_bits(approx, p)
    # root < true value < root + 1: nudge by a quarter unit so rounding sees "above"
    nudge = Fraction(1, 4 * (y.denominator << (extra // 2))) * Fraction(2) ** e
    return round_to_bits(approx + nudge, p)
