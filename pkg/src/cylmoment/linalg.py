"""Exact rational LDL^T factorizations."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

Matrix = list[list[Fraction]]


def as_matrix(rows: Sequence[Sequence]) -> Matrix:
    m = [[Fraction(x) for x in row] for row in rows]
    n = len(m)
    if any(len(row) != n for row in m):
        raise ValueError("matrix must be square")
    return m


def is_symmetric(m: Sequence[Sequence]) -> bool:
    n = len(m)
    return all(m[i][j] == m[j][i] for i in range(n) for j in range(i + 1, n))


def ldl(m: Sequence[Sequence[Fraction]]) -> tuple[Matrix, list[Fraction]]:
    """Unpivoted ``m = L diag(d) L^T`` with unit lower-triangular ``L``.

    Raises ``ZeroDivisionError`` on a zero pivot; positive definiteness is
    equivalent to every pivot being positive.
    """
    n = len(m)
    low = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    d: list[Fraction] = []
    for j in range(n):
        dj = Fraction(m[j][j]) - sum(low[j][k] ** 2 * d[k] for k in range(j))
        d.append(dj)
        if dj == 0 and j < n - 1:
            raise ZeroDivisionError(f"zero pivot at position {j}")
        for i in range(j + 1, n):
            low[i][j] = (Fraction(m[i][j]) - sum(low[i][k] * low[j][k] * d[k] for k in range(j))) / dj
    return low, d


def is_positive_definite(m: Sequence[Sequence]) -> bool:
    if not is_symmetric(m):
        return False
    try:
        _, d = ldl(m)
    except ZeroDivisionError:
        return False
    return all(x > 0 for x in d)


def quadratic_form(m: Sequence[Sequence], v: Sequence) -> Fraction:
    n = len(m)
    return sum((v[i] * m[i][j] * v[j] for i in range(n) for j in range(n)), Fraction(0))


@dataclass(frozen=True)
class Congruence:
    """Outcome of pivoted symmetric elimination.

    ``pivots`` are the diagonal entries met in pivot order; when the matrix is
    not PSD, ``witness`` is a rational vector with a negative quadratic form.
    """

    psd: bool
    pivots: tuple[Fraction, ...]
    order: tuple[int, ...]
    witness: tuple[Fraction, ...] | None = None


def congruence_diagonalize(m: Sequence[Sequence]) -> Congruence:
    """Symmetric elimination with largest-diagonal pivoting, exact.

    Keeps for every remaining index ``j`` a vector ``V_j`` with
    ``W[i][j] = V_i^T m V_j``, so a negative entry of the working matrix
    translates directly into a witness vector for the original ``m``.
    """
    a = as_matrix(m)
    n = len(a)
    if not is_symmetric(a):
        raise ValueError("matrix must be symmetric")
    w = [row[:] for row in a]
    vecs = [[Fraction(int(i == j)) for i in range(n)] for j in range(n)]
    remaining = list(range(n))
    pivots: list[Fraction] = []
    order: list[int] = []
    while remaining:
        neg = [i for i in remaining if w[i][i] < 0]
        if neg:
            return Congruence(False, tuple(pivots), tuple(order), tuple(vecs[neg[0]]))
        k = max(remaining, key=lambda i: (w[i][i], -i))
        if w[k][k] == 0:
            for i in remaining:
                for j in remaining:
                    if i < j and w[i][j] != 0:
                        s = 1 if w[i][j] < 0 else -1
                        v = [vecs[i][t] + s * vecs[j][t] for t in range(n)]
                        return Congruence(False, tuple(pivots), tuple(order), tuple(v))
            pivots.extend(Fraction(0) for _ in remaining)
            order.extend(remaining)
            break
        piv = w[k][k]
        pivots.append(piv)
        order.append(k)
        remaining.remove(k)
        for j in remaining:
            f = w[k][j] / piv
            if f:
                vecs[j] = [vecs[j][t] - f * vecs[k][t] for t in range(n)]
        for i in remaining:
            fi = w[i][k] / piv
            if not fi:
                continue
            for j in remaining:
                w[i][j] -= fi * w[k][j]
    return Congruence(True, tuple(pivots), tuple(order))
