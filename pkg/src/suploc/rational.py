"""Parsing and formatting of exact rationals."""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Union

Q = Union[int, str, Fraction]


def as_fraction(x: Q) -> Fraction:
    """Coerce ints, ``"p/q"`` strings and Fractions; floats are refused to keep results exact."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"expected an exact rational, got {type(x).__name__}: {x!r}")


def fmt(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def lcm(a: int, b: int) -> int:
    return a * b // gcd(a, b)
