"""Rational functions ``P / prod_i (1 + x_i^2)^{m_i}``.

These are the bounded-denominator fractions obtained by inverting the
elements ``1 + x_i^2``.  Every real point makes the denominator at least 1,
so evaluation is total, and ``a_i = 1/(1+x_i^2)``, ``b_i = x_i/(1+x_i^2)``
satisfy ``(a_i - 1/2)^2 + b_i^2 = 1/4``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .poly import Monomial, Poly, Scalar, evaluate, parse_poly
from .rational import as_fraction


def _one_plus_square(i: int) -> Poly:
    return Poly.const(1) + Poly.monomial(Monomial.var(i, 2))


def _divide_one_plus_square(p: Poly, i: int) -> Poly | None:
    """``p / (1 + x_i^2)`` if the division is exact, else None."""
    # group p by the power of x_i; coefficients are polys in the other variables
    by_power: dict[int, dict[Monomial, Fraction]] = {}
    for mono, c in p.terms.items():
        e = mono.exponent(i)
        rest = Monomial((v, k) for v, k in mono.pairs if v != i)
        by_power.setdefault(e, {})[rest] = c
    if not by_power:
        return Poly()
    top = max(by_power)
    coeffs = [Poly(by_power.get(k, {})) for k in range(top + 1)]
    quot: list[Poly] = [Poly()] * max(top - 1, 0)
    # x^k = x^{k-2} (1 + x^2) - x^{k-2}
    for k in range(top, 1, -1):
        q = coeffs[k]
        if q:
            quot[k - 2] = q
            coeffs[k - 2] = coeffs[k - 2] - q
    if coeffs[0] or (top >= 1 and coeffs[1]):
        return None
    xi = Poly.var(i)
    out = Poly()
    for k, q in enumerate(quot):
        if q:
            out = out + q * xi**k
    return out


@dataclass(frozen=True)
class FracElement:
    """``numerator / prod (1 + x_i^2)^{denom[i]}`` in canonical (reduced) form."""

    numerator: Poly
    denom: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        num, den = _canonicalize(self.numerator, dict(self.denom))
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denom", tuple(sorted(den.items())))

    @classmethod
    def make(cls, numerator: Poly | Scalar, denom: Mapping[int, int] | None = None) -> FracElement:
        num = numerator if isinstance(numerator, Poly) else Poly.const(numerator)
        return cls(num, tuple((denom or {}).items()))

    @property
    def denom_exponents(self) -> dict[int, int]:
        return dict(self.denom)

    def denominator_poly(self) -> Poly:
        out = Poly.const(1)
        for i, m in self.denom:
            out = out * _one_plus_square(i) ** m
        return out

    def _lift(self, target: Mapping[int, int]) -> Poly:
        num = self.numerator
        mine = self.denom_exponents
        for i, m in target.items():
            extra = m - mine.get(i, 0)
            if extra:
                num = num * _one_plus_square(i) ** extra
        return num

    def __add__(self, other: object) -> FracElement:
        o = _coerce(other)
        if o is None:
            return NotImplemented
        a, b = self.denom_exponents, o.denom_exponents
        common = {i: max(a.get(i, 0), b.get(i, 0)) for i in set(a) | set(b)}
        return FracElement.make(self._lift(common) + o._lift(common), common)

    __radd__ = __add__

    def __neg__(self) -> FracElement:
        return FracElement.make(-self.numerator, self.denom_exponents)

    def __sub__(self, other: object) -> FracElement:
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other: object) -> FracElement:
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other: object) -> FracElement:
        o = _coerce(other)
        if o is None:
            return NotImplemented
        den = self.denom_exponents
        for i, m in o.denom:
            den[i] = den.get(i, 0) + m
        return FracElement.make(self.numerator * o.numerator, den)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> FracElement:
        out = FracElement.make(1)
        for _ in range(n):
            out = out * self
        return out

    def evaluate(self, chi: Mapping[int, Scalar]) -> Fraction:
        return frac_eval(self, chi)

    def is_constant(self) -> bool:
        return not self.denom and self.numerator.degree <= 0

    def __str__(self) -> str:
        return format_frac(self)


def _coerce(x: object) -> FracElement | None:
    if isinstance(x, FracElement):
        return x
    if isinstance(x, (int, Fraction, Poly)):
        return FracElement.make(x)
    return None


def _canonicalize(num: Poly, den: dict[int, int]) -> tuple[Poly, dict[int, int]]:
    den = {int(i): int(m) for i, m in den.items() if m}
    if any(m < 0 for m in den.values()):
        raise ValueError("denominator exponents must be nonnegative")
    if num.is_zero():
        return num, {}
    for i in sorted(den):
        while den[i]:
            q = _divide_one_plus_square(num, i)
            if q is None:
                break
            num = q
            den[i] -= 1
    return num, {i: m for i, m in den.items() if m}


def canonicalize(u: FracElement) -> FracElement:
    return FracElement(u.numerator, u.denom)


def frac_add(u: FracElement, v: FracElement) -> FracElement:
    return u + v


def frac_mul(u: FracElement, v: FracElement) -> FracElement:
    return u * v


def frac_eval(u: FracElement, chi: Mapping[int, Scalar]) -> Fraction:
    """Exact value at a real point; the denominator is always >= 1."""
    den = Fraction(1)
    for i, m in u.denom:
        den *= (1 + Fraction(chi.get(i, 0)) ** 2) ** m
    return evaluate(u.numerator, chi) / den


def inverse_one_plus_square(i: int) -> FracElement:
    """``a_i = 1/(1 + x_i^2)``."""
    return FracElement.make(1, {i: 1})


def bounded_coordinate(i: int) -> FracElement:
    """``b_i = x_i/(1 + x_i^2)``."""
    return FracElement.make(Poly.var(i), {i: 1})


@dataclass(frozen=True)
class BoundedPair:
    a: Fraction
    b: Fraction

    @property
    def circle_residual(self) -> Fraction:
        return (self.a - Fraction(1, 2)) ** 2 + self.b**2 - Fraction(1, 4)


def bounded_transform(t) -> BoundedPair:
    t = as_fraction(t)
    d = 1 + t * t
    return BoundedPair(1 / d, t / d)


def _power_bound(j: int, m: int) -> Fraction:
    # |x|^j/(1+x^2)^m = (|x|/(1+x^2))^k * |x|^(j-k)/(1+x^2)^(m-k) with k = min(j, 2m-j),
    # and |x|/(1+x^2) <= 1/2, |x|^(j-k)/(1+x^2)^(m-k) <= 1 when j-k <= 2(m-k)
    return Fraction(1, 2) ** min(j, 2 * m - j)


def bound_certificate(u: FracElement) -> Fraction | float:
    """Certified ``sup |u|`` over real points, or ``math.inf`` if ``u`` is unbounded.

    Each numerator term is bounded by a product of per-variable bounds and the
    terms are combined with the triangle inequality, so the bound is sound but
    only tight in simple cases such as ``a_i`` and ``b_i``.
    """
    den = u.denom_exponents
    total = Fraction(0)
    for mono, c in u.numerator.terms.items():
        term = abs(c)
        for var, j in mono.pairs:
            m = den.get(var, 0)
            if j > 2 * m:
                return math.inf
            term *= _power_bound(j, m)
        total += term
    return total


# text form ----------------------------------------------------------------

_DENOM_FACTOR = re.compile(r"\(\s*1\s*\+\s*x(\d+)\s*\^\s*2\s*\)(?:\s*\^\s*(\d+))?")
_SPLIT = re.compile(r"/\s*(?=\(\s*1\s*\+\s*x\d+\s*\^\s*2\s*\))")


def parse_frac(text: str) -> FracElement:
    """Parse ``P / (1+x1^2)^2*(1+x3^2)``; ``P`` may be parenthesized."""
    parts = _SPLIT.split(text, maxsplit=1)
    num_text = parts[0].strip()
    if num_text.startswith("(") and num_text.endswith(")") and _balanced_outer(num_text):
        num_text = num_text[1:-1]
    num = parse_poly(num_text)
    den: dict[int, int] = {}
    if len(parts) == 2:
        rest = parts[1].strip()
        for piece in re.split(r"\s*\*\s*", rest):
            mt = _DENOM_FACTOR.fullmatch(piece.strip())
            if mt is None:
                raise ValueError(f"bad denominator factor {piece!r}")
            i = int(mt.group(1))
            if i < 1:
                raise ValueError("variable index 0 (indices are 1-based)")
            den[i] = den.get(i, 0) + int(mt.group(2) or 1)
    return FracElement.make(num, den)


def _balanced_outer(s: str) -> bool:
    depth = 0
    for k, ch in enumerate(s):
        depth += ch == "("
        depth -= ch == ")"
        if depth == 0 and k < len(s) - 1:
            return False
    return True


def format_frac(u: FracElement) -> str:
    num = str(u.numerator)
    if not u.denom:
        return num
    if len(u.numerator) > 1 or num.startswith("-"):
        num = f"({num})"
    factors = "*".join(f"(1+x{i}^2)" + (f"^{m}" if m > 1 else "") for i, m in u.denom)
    return f"{num} / {factors}"
