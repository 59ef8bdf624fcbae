"""Conversions between user-facing numbers and exact rationals."""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Any


def as_fraction(x: Any) -> Fraction:
    """Read ``x`` as an exact rational.

    Floats are read by their shortest decimal repr, so ``0.04`` becomes
    ``1/25`` rather than the nearest binary fraction.  Strings accept ``"p/q"``
    and decimals.
    """
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.replace(" ", ""))
    raise TypeError(f"cannot read {x!r} as a rational")


def fraction_str(x: Fraction | int) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def isqrt_exact(n: int) -> int | None:
    if n < 0:
        return None
    r = math.isqrt(n)
    return r if r * r == n else None


def sqrt_exact(x: Fraction) -> Fraction | None:
    """Exact square root of a nonnegative rational, or None if irrational."""
    p, q = isqrt_exact(x.numerator), isqrt_exact(x.denominator)
    if p is None or q is None:
        return None
    return Fraction(p, q)


def iroot_exact(n: int, k: int) -> int | None:
    """Exact integer k-th root of n >= 0, or None."""
    if n < 0:
        return None
    if n in (0, 1):
        return n
    if n.bit_length() < 900:
        r = int(round(n ** (1.0 / k)))
        for c in (r - 1, r, r + 1):
            if c >= 0 and c**k == n:
                return c
        if r < (1 << 40):
            return None
    # float guess can be far off for very large n; fall back to bisection
    lo, hi = 0, 1 << (n.bit_length() // k + 1)
    while lo <= hi:
        mid = (lo + hi) // 2
        v = mid**k
        if v == n:
            return mid
        if v < n:
            lo = mid + 1
        else:
            hi = mid - 1
    return None


def to_jsonable(x: Any) -> Any:
    """Fractions to ``"p/q"`` strings, recursively; ints and floats pass through."""
    if isinstance(x, (bool, int, str)) or x is None:
        return x
    if isinstance(x, Fraction):
        return fraction_str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if hasattr(x, "__float__"):
        return float(x)
    return str(x)
