"""Rational position keys for ordered lists under concurrent insertion.

Keys are exact fractions; inserting between two neighbors takes the
mediant (a+c)/(b+d), which always lies strictly between them and never
forces neighbors to be re-indexed. The virtual bounds are 0/1 below and
1/0 above, Stern-Brocot style, so "insert first/last" are just mediants
against the bounds.
"""
from __future__ import annotations

from fractions import Fraction

ZERO = Fraction(0)  # sentinel carried by tombstoned sections


def mediant(lo_num: int, lo_den: int, hi_num: int, hi_den: int) -> Fraction:
    return Fraction(lo_num + hi_num, lo_den + hi_den)


def between(lo: Fraction | None, hi: Fraction | None) -> Fraction:
    """A key strictly between lo and hi (either bound may be open)."""
    ln, ld = (lo.numerator, lo.denominator) if lo is not None else (0, 1)
    hn, hd = (hi.numerator, hi.denominator) if hi is not None else (1, 0)
    key = mediant(ln, ld, hn, hd)
    if lo is not None and not key > lo:
        raise ValueError(f"no key between {lo} and {hi}")
    if hi is not None and not key < hi:
        raise ValueError(f"no key between {lo} and {hi}")
    return key


def key_to_wire(key: Fraction) -> list:
    return [key.numerator, key.denominator]


def key_from_wire(value) -> Fraction:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
        or value[1] <= 0
    ):
        raise ValueError(f"bad order key on wire: {value!r}")
    return Fraction(value[0], value[1])
