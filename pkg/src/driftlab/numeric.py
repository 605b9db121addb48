"""Dual numeric mode helpers: exact rationals or binary floats, never mixed."""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Union

Number = Union[Fraction, float]

RATIONAL = "rational"
FLOAT = "float"
MODES = (RATIONAL, FLOAT)

FLOAT_ROW_TOL = 1e-12


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValueError(f"unknown numeric mode {mode!r}; expected one of {MODES}")
    return mode


def parse_number(value, mode: str) -> Number:
    """Parse a JSON/CLI value into the numeric type of ``mode``.

    Rational mode accepts ``"p/q"`` strings, integer strings and ints. Floats
    are refused there because they would silently round the chain.
    """
    if mode == RATIONAL:
        if isinstance(value, bool):
            raise ValueError(f"not a number: {value!r}")
        if isinstance(value, (int, Fraction)):
            return Fraction(value)
        if isinstance(value, str):
            return Fraction(value.strip())
        raise ValueError(f"rational mode needs 'p/q' strings or ints, got {value!r}")
    if isinstance(value, str):
        s = value.strip()
        return float(Fraction(s)) if "/" in s else float(s)
    return float(value)


def format_number(value) -> str | float:
    """Render a value for JSON/CSV: rationals as ``"p/q"`` strings, floats as is."""
    if isinstance(value, Rational):
        return str(Fraction(value))
    return float(value)


def to_mode(value, mode: str) -> Number:
    if mode == RATIONAL:
        return Fraction(value)
    return float(value)


def is_close(a: Number, b: Number, mode: str, rel: float = 1e-10, abs_: float = 1e-12) -> bool:
    if mode == RATIONAL:
        return a == b
    return abs(a - b) <= max(abs_, rel * max(abs(a), abs(b)))
