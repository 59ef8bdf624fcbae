"""Exact sparse polynomials in countably many variables x1, x2, ...

A :class:`Monomial` is a sorted tuple of ``(index, exponent)`` pairs with every
exponent positive; the empty tuple is the unit monomial.  A :class:`Poly` maps
monomials to nonzero :class:`fractions.Fraction` coefficients; the empty map is
the zero polynomial.  Both are immutable and hashable.

Canonical text output lists terms by descending total degree and, inside one
degree, lexicographically with lower variable indices first::

    >>> str(parse_poly("x2 + 1 + 3/2*x3*x1^2"))
    '3/2*x1^2*x3 + x2 + 1'
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Union

MAX_EXPONENT = 1 << 16

Scalar = Union[int, Fraction]


class PolySyntaxError(ValueError):
    """Raised by :func:`parse_poly`; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


def _canon_pairs(pairs: Iterable[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    acc: dict[int, int] = {}
    for var, exp in pairs:
        if var < 1:
            raise ValueError(f"variable index must be >= 1, got {var}")
        if exp < 0:
            raise ValueError(f"negative exponent {exp} for x{var}")
        acc[var] = acc.get(var, 0) + exp
    return tuple(sorted((v, e) for v, e in acc.items() if e))


class Monomial:
    __slots__ = ("_pairs", "_hash")

    def __init__(self, exponents: Mapping[int, int] | Iterable[tuple[int, int]] = ()):
        items = exponents.items() if isinstance(exponents, Mapping) else exponents
        self._pairs = _canon_pairs(items)
        self._hash = hash(self._pairs)

    @classmethod
    def var(cls, index: int, exponent: int = 1) -> Monomial:
        return cls(((index, exponent),))

    @classmethod
    def from_dense(cls, indices: Iterable[int], exponents: Iterable[int]) -> Monomial:
        """Build ``prod x_{indices[k]}^{exponents[k]}``."""
        return cls(zip(indices, exponents))

    @property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        return self._pairs

    @property
    def degree(self) -> int:
        return sum(e for _, e in self._pairs)

    @property
    def support(self) -> frozenset[int]:
        return frozenset(v for v, _ in self._pairs)

    def exponent(self, index: int) -> int:
        for v, e in self._pairs:
            if v == index:
                return e
        return 0

    def dense(self, indices: Iterable[int]) -> tuple[int, ...]:
        """Exponent vector over ``indices``; raises if the monomial uses others."""
        indices = tuple(indices)
        extra = self.support.difference(indices)
        if extra:
            raise ValueError(f"monomial {self} uses variables {sorted(extra)} outside {indices}")
        return tuple(self.exponent(i) for i in indices)

    def is_unit(self) -> bool:
        return not self._pairs

    def __mul__(self, other: Monomial) -> Monomial:
        if not isinstance(other, Monomial):
            return NotImplemented
        return Monomial(self._pairs + other._pairs)

    def divides(self, other: Monomial) -> bool:
        return all(other.exponent(v) >= e for v, e in self._pairs)

    def sort_key(self) -> tuple:
        """Graded-lex key: ascending degree, then x1-heavy monomials first."""
        if not self._pairs:
            return (0, ())
        top = self._pairs[-1][0]
        dense = [0] * top
        for v, e in self._pairs:
            dense[v - 1] = e
        return (self.degree, tuple(-e for e in dense))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Monomial) and self._pairs == other._pairs

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: Monomial) -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        if not self._pairs:
            return "1"
        return "*".join(f"x{v}" if e == 1 else f"x{v}^{e}" for v, e in self._pairs)

    def __repr__(self) -> str:
        return f"Monomial({dict(self._pairs)!r})"


ONE_MONOMIAL = Monomial()


class Poly:
    """Immutable polynomial with exact rational coefficients."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, Scalar] | None = None):
        clean: dict[Monomial, Fraction] = {}
        for mono, coef in (terms or {}).items():
            c = Fraction(coef)
            if c:
                clean[mono] = c
        self._terms = clean
        self._hash: int | None = None

    @classmethod
    def _raw(cls, terms: dict[Monomial, Fraction]) -> Poly:
        p = cls.__new__(cls)
        p._terms = {m: c for m, c in terms.items() if c}
        p._hash = None
        return p

    @classmethod
    def const(cls, value: Scalar) -> Poly:
        return cls({ONE_MONOMIAL: value})

    @classmethod
    def var(cls, index: int) -> Poly:
        return cls({Monomial.var(index): 1})

    @classmethod
    def monomial(cls, mono: Monomial, coef: Scalar = 1) -> Poly:
        return cls({mono: coef})

    @classmethod
    def linear(cls, coeffs: Mapping[int, Scalar]) -> Poly:
        return cls({Monomial.var(i): c for i, c in coeffs.items()})

    @property
    def terms(self) -> Mapping[Monomial, Fraction]:
        return self._terms

    def items(self) -> Iterator[tuple[Monomial, Fraction]]:
        """Terms in canonical (printing) order."""
        for mono in sorted(self._terms, key=_print_key):
            yield mono, self._terms[mono]

    def coefficient(self, mono: Monomial) -> Fraction:
        return self._terms.get(mono, Fraction(0))

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    # ring structure -----------------------------------------------------

    @staticmethod
    def _coerce(other: object) -> Poly | None:
        if isinstance(other, Poly):
            return other
        if isinstance(other, (int, Fraction)):
            return Poly.const(other)
        return None

    def __add__(self, other: object) -> Poly:
        g = self._coerce(other)
        if g is None:
            return NotImplemented
        out = dict(self._terms)
        for mono, c in g._terms.items():
            out[mono] = out.get(mono, 0) + c
        return Poly._raw(out)

    __radd__ = __add__

    def __neg__(self) -> Poly:
        return Poly._raw({m: -c for m, c in self._terms.items()})

    def __sub__(self, other: object) -> Poly:
        g = self._coerce(other)
        if g is None:
            return NotImplemented
        return self + (-g)

    def __rsub__(self, other: object) -> Poly:
        g = self._coerce(other)
        if g is None:
            return NotImplemented
        return g - self

    def __mul__(self, other: object) -> Poly:
        g = self._coerce(other)
        if g is None:
            return NotImplemented
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in g._terms.items():
                m = m1 * m2
                out[m] = out.get(m, 0) + c1 * c2
        return Poly._raw(out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> Poly:
        if not isinstance(n, int) or n < 0:
            return NotImplemented
        result, base = Poly.const(1), self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other: object) -> bool:
        g = self._coerce(other)
        if g is None:
            return NotImplemented
        return self._terms == g._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    # queries ------------------------------------------------------------

    @property
    def support(self) -> frozenset[int]:
        out: set[int] = set()
        for mono in self._terms:
            out.update(mono.support)
        return frozenset(out)

    @property
    def degree(self) -> int | float:
        """Total degree; ``-math.inf`` for the zero polynomial."""
        if not self._terms:
            return -math.inf
        return max(m.degree for m in self._terms)

    def degree_in(self, index: int) -> int:
        return max((m.exponent(index) for m in self._terms), default=0)

    def linear_coefficients(self) -> dict[int, Fraction]:
        """Coefficients of a homogeneous linear form; raises otherwise."""
        out = {}
        for mono, c in self._terms.items():
            if mono.degree != 1:
                raise ValueError(f"{self} is not a homogeneous linear form")
            out[mono.pairs[0][0]] = c
        return out

    def evaluate(self, chi: Mapping[int, Scalar]) -> Fraction:
        return evaluate(self, chi)

    def __str__(self) -> str:
        return format_poly(self)

    def __repr__(self) -> str:
        return f"Poly({format_poly(self)!r})"


def _print_key(mono: Monomial) -> tuple:
    deg, lex = mono.sort_key()
    return (-deg, lex)


def _format_coef(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_poly(f: Poly) -> str:
    if f.is_zero():
        return "0"
    parts: list[str] = []
    for mono, c in f.items():
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        if mono.is_unit():
            body = _format_coef(mag)
        elif mag == 1:
            body = str(mono)
        else:
            body = f"{_format_coef(mag)}*{mono}"
        if not parts:
            parts.append(body if sign == "+" else f"-{body}")
        else:
            parts.append(f"{sign} {body}")
    return " ".join(parts)


def add(f: Poly, g: Poly) -> Poly:
    return f + g


def mul(f: Poly, g: Poly) -> Poly:
    return f * g


def support(f: Poly) -> frozenset[int]:
    return f.support


def degree(f: Poly) -> int | float:
    return f.degree


def evaluate(f: Poly, chi: Mapping[int, Scalar]) -> Fraction:
    """Apply the character ``chi`` (unmentioned variables are 0) to ``f``."""
    total = Fraction(0)
    for mono, c in f.terms.items():
        val = c
        for var, e in mono.pairs:
            x = chi.get(var, 0)
            if not x:
                val = Fraction(0)
                break
            val *= Fraction(x) ** e
        total += val
    return total


def _compositions(n: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, parts - 1):
            yield (first,) + rest


def monomials_up_to(indices: Iterable[int], max_degree: int) -> list[Monomial]:
    """All monomials over ``indices`` of degree <= max_degree, graded-lex ascending."""
    indices = tuple(sorted(set(indices)))
    if not indices:
        return [ONE_MONOMIAL]
    out: list[Monomial] = []
    for d in range(max_degree + 1):
        # compositions come out x1-heavy first, which is the graded-lex order
        out.extend(Monomial.from_dense(indices, c) for c in _compositions(d, len(indices)))
    return out


# parsing ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<var>x(?P<idx>\d+)(?:\s*\^\s*(?P<exp>\d+))?)"
    r"|(?P<num>\d+(?:\s*/\s*\d+)?)"
    r"|\(\s*(?P<pnum>[+-]?\s*\d+(?:\s*/\s*\d+)?)\s*\)"
    r"|(?P<op>[+\-*])"
    r")"
)


def _tokens(text: str) -> Iterator[tuple[str, str, re.Match, int]]:
    pos, n = 0, len(text)
    while pos < n:
        if text[pos:].strip() == "":
            return
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            off = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise PolySyntaxError(f"unexpected character {text[off]!r}", _byte_offset(text, off))
        start = m.start(m.lastgroup) if m.lastgroup else pos
        kind = "var" if m.group("var") else "num" if m.group("num") else "num" if m.group("pnum") else "op"
        yield kind, m.group(0).strip(), m, start
        pos = m.end()


def _byte_offset(text: str, char_offset: int) -> int:
    return len(text[:char_offset].encode("utf-8"))


def _number(tok_match: re.Match) -> Fraction:
    raw = tok_match.group("num") or tok_match.group("pnum")
    raw = re.sub(r"\s+", "", raw)
    if "/" in raw and int(raw.split("/")[1]) == 0:
        raise ZeroDivisionError(f"zero denominator in {raw!r}")
    return Fraction(raw)


def parse_poly(text: str) -> Poly:
    """Parse the ASCII polynomial grammar, e.g. ``"3/2*x1^2*x3 - x2 + 1"``."""
    toks = list(_tokens(text))
    if not toks:
        raise PolySyntaxError("empty polynomial", _byte_offset(text, len(text)))
    acc: dict[Monomial, Fraction] = {}
    i = 0
    sign = 1
    expect_factor = True
    coef = Fraction(1)
    pairs: list[tuple[int, int]] = []
    have_factor = False

    def flush() -> None:
        mono = Monomial(pairs)
        acc[mono] = acc.get(mono, Fraction(0)) + sign * coef

    while i < len(toks):
        kind, raw, m, off = toks[i]
        boff = _byte_offset(text, off)
        if expect_factor:
            if kind == "op" and raw in "+-" and not have_factor and not pairs and coef == 1:
                if raw == "-":
                    sign = -sign
                i += 1
                continue
            if kind == "var":
                idx = int(m.group("idx"))
                if idx == 0:
                    raise PolySyntaxError("variable index 0 (indices are 1-based)", boff)
                exp = int(m.group("exp")) if m.group("exp") is not None else 1
                if exp > MAX_EXPONENT:
                    raise PolySyntaxError(f"exponent {exp} exceeds {MAX_EXPONENT}", boff)
                pairs.append((idx, exp))
            elif kind == "num":
                try:
                    coef *= _number(m)
                except ZeroDivisionError as exc:
                    raise PolySyntaxError(str(exc), boff) from None
            else:
                raise PolySyntaxError(f"expected a factor, found {raw!r}", boff)
            have_factor = True
            expect_factor = False
            i += 1
            continue
        # after a factor: '*' continues the term, '+'/'-' starts a new one
        if kind == "op" and raw == "*":
            expect_factor = True
        elif kind == "op" and raw in "+-":
            flush()
            sign = -1 if raw == "-" else 1
            coef, pairs, have_factor = Fraction(1), [], False
            expect_factor = True
        else:
            raise PolySyntaxError(f"expected an operator, found {raw!r}", boff)
        i += 1
    if expect_factor:
        raise PolySyntaxError("dangling operator", _byte_offset(text, len(text.rstrip())))
    flush()
    return Poly._raw(acc)


def parse_monomial(text: str) -> Monomial:
    """Parse a monomial key; the empty string is the unit monomial."""
    if text.strip() in ("", "1"):
        return ONE_MONOMIAL
    f = parse_poly(text)
    if len(f) != 1 or next(iter(f.terms.values())) != 1:
        raise ValueError(f"{text!r} is not a monomial")
    return next(iter(f.terms))
