"""Input validation helpers used by the public constructors and searches."""

from __future__ import annotations

import numbers
from fractions import Fraction

from .errors import InvalidToken


def check_count(value, name, minimum=0):
    """Return ``value`` as an int, raising ``ValueError`` if it is not an integer >= minimum."""
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_probability(value, name, *, open_low=False, open_high=False):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    low_ok = value > 0 if open_low else value >= 0
    high_ok = value < 1 if open_high else value <= 1
    if not (low_ok and high_ok):
        lo = "(" if open_low else "["
        hi = ")" if open_high else "]"
        raise ValueError(f"{name} must lie in {lo}0, 1{hi}, got {value}")
    return value


def as_fraction(value):
    """Parse a probability given as Fraction, int, float, or a "p/q" / decimal string.

    Floats are converted through their shortest repr so that ``0.1`` becomes 1/10.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("probability cannot be a bool")
    if isinstance(value, numbers.Integral):
        return Fraction(int(value))
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a probability")


def check_token_ids(token_ids, vocab_size, *, allow_eos=False):
    """Validate a sequence of token ids against a vocabulary of ``vocab_size``."""
    out = tuple(int(t) for t in token_ids)
    for t in out:
        if not 0 <= t < vocab_size:
            raise InvalidToken(f"token id {t} outside vocabulary of size {vocab_size}")
        if t == 0 and not allow_eos:
            raise InvalidToken("end-of-sequence id 0 may not appear inside a sequence")
    return out
