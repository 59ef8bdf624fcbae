from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import strategies as st

from cylmoment.poly import Monomial, Poly


def random_rational_pd(rng: random.Random, n: int, dense: bool = True) -> list[list[Fraction]]:
    """``A A^T / q + I / r``: rational and positive definite."""
    if not dense:
        return [[Fraction(rng.randint(1, 9), rng.randint(1, 4)) if i == j else Fraction(0)
                 for j in range(n)] for i in range(n)]
    a = [[Fraction(rng.randint(-3, 3), rng.randint(1, 3)) for _ in range(n)] for _ in range(n)]
    q, r = rng.randint(1, 4), rng.randint(1, 5)
    return [[sum(a[i][k] * a[j][k] for k in range(n)) / q + (Fraction(1, r) if i == j else 0)
             for j in range(n)] for i in range(n)]


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20241014)


rationals = st.fractions(min_value=-20, max_value=20, max_denominator=12)
small_vars = st.integers(min_value=1, max_value=5)


@st.composite
def monomials(draw, max_vars: int = 4, max_exp: int = 3) -> Monomial:
    pairs = draw(st.lists(st.tuples(st.integers(1, max_vars), st.integers(1, max_exp)), max_size=3))
    return Monomial(pairs)


@st.composite
def polys(draw, max_terms: int = 4, max_vars: int = 4, positive: bool = False) -> Poly:
    coef = st.fractions(min_value=1, max_value=9, max_denominator=5) if positive else rationals
    terms = draw(st.dictionaries(monomials(max_vars), coef, max_size=max_terms))
    return Poly(terms)


@st.composite
def characters(draw, max_vars: int = 5) -> dict[int, Fraction]:
    return draw(st.dictionaries(st.integers(1, max_vars), rationals, max_size=max_vars))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
