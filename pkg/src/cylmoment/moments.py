"""Moment functionals on the polynomial algebra and their finite diagnostics."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

import mpmath
import numpy as np

from .gaussian import CovarianceSpec, GaussianCylinderMeasure, DEFAULT_WICK_CAP
from .linalg import congruence_diagonalize, quadratic_form, is_symmetric
from .measures import (
    AtomicMarginal,
    CheckReport,
    CylinderMeasure,
    FiniteMeasure,
    MarginalUnavailable,
    Residual,
    TableMarginal,
    index_set,
)
from .poly import ONE_MONOMIAL, Monomial, Poly, monomials_up_to, parse_monomial
from .rational import as_fraction, to_jsonable

PRECISION_DIGITS = 50


class FunctionalError(ValueError):
    pass


class MomentFunctional:
    """Linear functional ``L`` on polynomials, given by its monomial moments."""

    exact = True

    def moment(self, alpha: Monomial):
        raise NotImplementedError

    def evaluate(self, f: Poly):
        total = Fraction(0)
        for mono, c in f.terms.items():
            total = total + c * self.moment(mono)
        return total

    __call__ = evaluate
    expectation = evaluate

    def cylinder_measure(self) -> CylinderMeasure:
        raise NotImplementedError


class GaussianFunctional(MomentFunctional):
    """``L(f) = integral of f`` against the Gaussian cylinder measure of ``spec``."""

    def __init__(self, spec: CovarianceSpec, cap: int = DEFAULT_WICK_CAP):
        self.spec = spec
        self.cap = cap
        self._measure = GaussianCylinderMeasure(spec, cap)

    def moment(self, alpha: Monomial):
        if alpha.is_unit():
            return Fraction(1)
        return self._measure.marginal(alpha.support).moment(alpha)

    def variance(self, k: int):
        return self.spec.variance(k)

    def cylinder_measure(self) -> GaussianCylinderMeasure:
        return self._measure


class TableFunctional(MomentFunctional):
    """Functional known from an explicit moment table.

    Queries outside the declared support or above ``max_degree`` are errors;
    a finite table says nothing about higher moments.
    """

    def __init__(self, support: Iterable[int], max_degree: int, moments: Mapping[Monomial | str, Any]):
        self.support = index_set(support)
        self.max_degree = int(max_degree)
        table: dict[Monomial, Fraction] = {}
        for key, val in moments.items():
            mono = parse_monomial(key) if isinstance(key, str) else key
            if not mono.support <= set(self.support):
                raise FunctionalError(f"table entry {mono} is outside the support {self.support}")
            if mono.degree > self.max_degree:
                raise FunctionalError(f"table entry {mono} exceeds max_degree {self.max_degree}")
            table[mono] = as_fraction(val)
        if table.get(ONE_MONOMIAL) != 1:
            raise FunctionalError("moment table must normalize L(1) = 1")
        self.table = table

    @classmethod
    def from_json(cls, obj: Mapping) -> TableFunctional:
        return cls(obj["support"], obj["max_degree"], obj["moments"])

    def to_json(self) -> dict:
        return {
            "support": list(self.support),
            "max_degree": self.max_degree,
            "moments": {("" if m.is_unit() else str(m)): to_jsonable(v)
                        for m, v in sorted(self.table.items(), key=lambda kv: kv[0].sort_key())},
        }

    def moment(self, alpha: Monomial) -> Fraction:
        if not alpha.support <= set(self.support):
            raise MarginalUnavailable(f"{alpha} is outside the table support {self.support}")
        if alpha.degree > self.max_degree:
            raise MarginalUnavailable(f"{alpha} exceeds the table degree {self.max_degree}")
        try:
            return self.table[alpha]
        except KeyError:
            raise MarginalUnavailable(f"moment of {alpha} is missing from the table") from None

    def cylinder_measure(self) -> CylinderMeasure:
        return _TableCylinder(self)


class _TableCylinder(CylinderMeasure):
    def __init__(self, functional: TableFunctional):
        self.functional = functional

    def marginal(self, indices: Iterable[int]) -> TableMarginal:
        idx = index_set(indices)
        if not set(idx) <= set(self.functional.support):
            raise MarginalUnavailable(f"indices {idx} are outside the table support")
        sub = {m: v for m, v in self.functional.table.items() if m.support <= set(idx)}
        return TableMarginal(idx, sub, self.functional.max_degree)


def eval_functional(functional: MomentFunctional, f: Poly):
    return functional.evaluate(f)


# Carleman ---------------------------------------------------------------------


class CarlemanVerdict(str, enum.Enum):
    DIVERGES = "Diverges"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class CarlemanReport:
    var: int
    horizon: int
    even_moments: list[Fraction]
    terms: list[mpmath.mpf]
    partial_sums: list[mpmath.mpf]
    verdict: CarlemanVerdict
    justification: str
    lower_bound_ratios: list[mpmath.mpf] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "var": self.var,
            "horizon": self.horizon,
            "even_moments": [to_jsonable(m) for m in self.even_moments],
            "terms": [float(t) for t in self.terms],
            "partial_sums": [float(s) for s in self.partial_sums],
            "verdict": self.verdict.value,
            "justification": self.justification,
        }
        if self.lower_bound_ratios:
            out["lower_bound_ratios"] = [float(r) for r in self.lower_bound_ratios]
        return out


def carleman_report(functional: MomentFunctional, var: int, horizon: int) -> CarlemanReport:
    """Terms ``L(t^{2n})^{-1/(2n)}``, ``n = 1..horizon``, for ``t = x_var``.

    Divergence of the full series is only claimed with an analytic certificate:
    for a Gaussian of variance ``b`` the terms dominate ``(2 b n)^{-1/2}``
    because ``(2n-1)!! <= (2n)^n``.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    moments = [functional.moment(Monomial.var(var, 2 * n)) for n in range(1, horizon + 1)]
    for n, m in enumerate(moments, start=1):
        if m < 0:
            raise FunctionalError(f"L(x{var}^{2 * n}) = {m} < 0: functional is not positive")
    terms, sums = [], []
    with mpmath.workdps(PRECISION_DIGITS):
        acc = mpmath.mpf(0)
        for n, m in enumerate(moments, start=1):
            mm = mpmath.mpf(m.numerator) / m.denominator if isinstance(m, Fraction) else mpmath.mpf(m)
            term = mpmath.inf if mm == 0 else mm ** (mpmath.mpf(-1) / (2 * n))
            acc += term
            terms.append(term)
            sums.append(acc)
        ratios: list = []
        if isinstance(functional, GaussianFunctional):
            b = functional.variance(var)
            bb = mpmath.mpf(b.numerator) / b.denominator if isinstance(b, Fraction) else mpmath.mpf(b)
            ratios = [t * mpmath.sqrt(2 * bb * n) for n, t in enumerate(terms, start=1)]
            if all(r >= 1 for r in ratios):
                verdict = CarlemanVerdict.DIVERGES
                why = (f"Gaussian variance {to_jsonable(b)}: term_n >= (2*b*n)^(-1/2) for n <= {horizon} "
                       "and for all n since (2n-1)!! <= (2n)^n; the minorant is a divergent p-series")
            else:
                verdict = CarlemanVerdict.INCONCLUSIVE
                why = "Gaussian lower bound failed numerically; no certificate"
        elif any(m == 0 for m in moments):
            verdict = CarlemanVerdict.DIVERGES
            why = "a vanishing even moment forces x = 0 almost surely; the series is +inf"
        else:
            verdict = CarlemanVerdict.INCONCLUSIVE
            why = f"finite table: no tail certificate beyond n = {horizon}"
    return CarlemanReport(var, horizon, moments, terms, sums, verdict, why, ratios)


# moment matrices and positivity ------------------------------------------------


@dataclass(frozen=True)
class MomentMatrix:
    basis: tuple[Monomial, ...]
    entries: tuple[tuple[Fraction, ...], ...]

    @property
    def size(self) -> int:
        return len(self.basis)

    def rows(self) -> list[list[Fraction]]:
        return [list(r) for r in self.entries]

    def to_dict(self) -> dict:
        return {"basis": [str(m) for m in self.basis], "entries": to_jsonable(self.rows())}


def moment_matrix(functional: MomentFunctional, indices: Iterable[int], degree: int) -> MomentMatrix:
    """``M[u, v] = L(u v)`` over the graded-lex monomial basis of degree <= d."""
    basis = tuple(monomials_up_to(index_set(indices), degree))
    cache: dict[Monomial, Any] = {}
    rows = []
    for u in basis:
        row = []
        for v in basis:
            uv = u * v
            if uv not in cache:
                cache[uv] = functional.moment(uv)
            row.append(cache[uv])
        rows.append(tuple(row))
    return MomentMatrix(basis, tuple(rows))


@dataclass(frozen=True)
class PSDResult:
    psd: bool
    pivots: tuple[Fraction, ...]
    witness: tuple[Fraction, ...] | None = None
    form_value: Fraction | None = None

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"status": "PSD" if self.psd else "NotPSD",
                               "pivots": to_jsonable(list(self.pivots))}
        if self.witness is not None:
            out["witness"] = to_jsonable(list(self.witness))
            out["form_value"] = to_jsonable(self.form_value)
        return out


def _sparse_witness(m: list[list[Fraction]]) -> tuple[Fraction, ...] | None:
    n = len(m)
    for i in range(n):
        if m[i][i] < 0:
            return tuple(Fraction(int(k == i)) for k in range(n))
    for i in range(n):
        for j in range(i + 1, n):
            s = -1 if m[i][j] > 0 else 1
            if m[i][i] + m[j][j] + 2 * s * m[i][j] < 0:
                return tuple(Fraction(1 if k == i else s if k == j else 0) for k in range(n))
    return None


def psd_check(m: MomentMatrix | Sequence[Sequence], *, strict: bool = False) -> PSDResult:
    """Exact PSD certificate by pivoted LDL^T; ``strict`` demands positive pivots.

    On failure the witness ``v`` satisfies ``v^T M v < 0`` exactly (or ``<= 0``
    with ``v != 0`` when ``strict`` fails on a singular PSD matrix).
    """
    rows = m.rows() if isinstance(m, MomentMatrix) else [[as_fraction(x) for x in r] for r in m]
    if not is_symmetric(rows):
        raise ValueError("psd_check needs a symmetric matrix")
    sparse = _sparse_witness(rows)
    if sparse is not None:
        return PSDResult(False, (), sparse, quadratic_form(rows, sparse))
    res = congruence_diagonalize(rows)
    if not res.psd:
        return PSDResult(False, res.pivots, res.witness, quadratic_form(rows, res.witness))
    if strict and any(p == 0 for p in res.pivots):
        return PSDResult(False, res.pivots)
    return PSDResult(True, res.pivots)


# quadrature witnesses ----------------------------------------------------------


class QuadratureError(ValueError):
    pass


@dataclass(frozen=True)
class AtomicMeasure:
    """One-dimensional measure ``sum_k weights[k] * delta(nodes[k])``."""

    nodes: tuple[float, ...]
    weights: tuple[float, ...]
    recurrence: tuple[tuple[Fraction, ...], tuple[Fraction, ...]] = ((), ())

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.nodes, self.weights))

    def moment(self, k: int) -> float:
        return math.fsum(w * x**k for x, w in zip(self.nodes, self.weights))

    def on(self, index: int) -> AtomicMarginal:
        return AtomicMarginal((index,), [(x,) for x in self.nodes], list(self.weights))

    def to_dict(self) -> dict:
        return {"nodes": list(self.nodes), "weights": list(self.weights)}


def chebyshev_recurrence(m: Sequence[Fraction], n: int) -> tuple[list[Fraction], list[Fraction]]:
    """Three-term recurrence ``(alpha_k, beta_k)``, ``k < n``, from ``m_0..m_{2n-1}``.

    Chebyshev's modified-moment-free algorithm, run in exact rationals so the
    usual ill-conditioning of ordinary moments does not arise.
    """
    m = [as_fraction(x) for x in m]
    if len(m) < 2 * n:
        raise QuadratureError(f"{n} atoms need {2 * n} moments, got {len(m)}")
    alpha, beta = [Fraction(0)] * n, [Fraction(0)] * n
    prev = [Fraction(0)] * (2 * n)
    cur = list(m[: 2 * n])
    alpha[0] = m[1] / m[0]
    beta[0] = m[0]
    for k in range(1, n):
        nxt = [Fraction(0)] * (2 * n)
        for ell in range(k, 2 * n - k):
            nxt[ell] = cur[ell + 1] - alpha[k - 1] * cur[ell] - beta[k - 1] * prev[ell]
        if nxt[k] <= 0:
            raise QuadratureError(f"Hankel matrix is not positive definite at order {k + 1}")
        alpha[k] = nxt[k + 1] / nxt[k] - cur[k] / cur[k - 1]
        beta[k] = nxt[k] / cur[k - 1]
        prev, cur = cur, nxt
    return alpha, beta


def hankel(m: Sequence, n: int) -> list[list[Fraction]]:
    return [[as_fraction(m[i + j]) for j in range(n)] for i in range(n)]


def quadrature_1d(m: Sequence, n: int | None = None, *, min_gap: float = 1e-9) -> AtomicMeasure:
    """``n``-atom measure matching ``m_0..m_{2n-1}`` (Gauss rule of the moments)."""
    m = [as_fraction(x) for x in m]
    if n is None:
        n = len(m) // 2
    if n < 1:
        raise QuadratureError("need at least one atom")
    if m[0] != 1:
        raise QuadratureError(f"m_0 must be 1, got {m[0]}")
    if len(m) < 2 * n:
        raise QuadratureError(f"{n} atoms need {2 * n} moments, got {len(m)}")
    if not psd_check(hankel(m, n), strict=True).psd:
        raise QuadratureError("Hankel matrix is not positive definite: no n-atom representing measure")
    alpha, beta = chebyshev_recurrence(m, n)
    jac = np.diag([float(a) for a in alpha])
    off = [math.sqrt(float(b)) for b in beta[1:]]
    jac += np.diag(off, 1) + np.diag(off, -1)
    try:
        nodes, vecs = np.linalg.eigh(jac)
    except np.linalg.LinAlgError as exc:
        raise QuadratureError(f"eigensolver failed: {exc}") from None
    if n > 1 and np.min(np.diff(nodes)) < min_gap:
        raise QuadratureError("quadrature nodes nearly coincide; moments are ill-conditioned")
    weights = float(beta[0]) * vecs[0, :] ** 2
    return AtomicMeasure(tuple(float(x) for x in nodes), tuple(float(w) for w in weights),
                         (tuple(alpha), tuple(beta)))


def product_measure(factors: Mapping[int, AtomicMeasure]) -> AtomicMarginal:
    """Tensor product of one-dimensional atomic measures."""
    idx = index_set(factors)
    pts, wts = [], []
    for combo in itertools.product(*(factors[i].atoms for i in idx)):
        pts.append(tuple(x for x, _ in combo))
        wts.append(math.prod(w for _, w in combo))
    return AtomicMarginal(idx, pts, wts)


def verify_representation(
    nu: AtomicMeasure | FiniteMeasure,
    functional: MomentFunctional,
    indices: Iterable[int],
    degree: int,
    *,
    tol: float = 1e-10,
) -> CheckReport:
    """Residuals ``|int x^alpha dnu - L(x^alpha)|`` for all ``deg alpha <= degree``.

    Float measures pass when each residual is within ``tol * max(1, |L|)``;
    exact measures must match exactly.
    """
    idx = index_set(indices)
    if isinstance(nu, AtomicMeasure):
        if len(idx) != 1:
            raise ValueError("a one-dimensional atomic measure needs exactly one index")
        nu = nu.on(idx[0])
    if tuple(nu.indices) != idx:
        raise ValueError(f"measure lives on {nu.indices}, not {idx}")
    report = CheckReport("representation", result={"indices": list(idx), "degree": degree})
    for alpha in monomials_up_to(idx, degree):
        got, want = nu.moment(alpha), functional.moment(alpha)
        if nu.exact_moments and isinstance(got, Fraction) and isinstance(want, Fraction):
            r, allowed = abs(got - want), Fraction(0)
        else:
            r = abs(float(got) - float(want))
            allowed = tol * max(1.0, abs(float(want)))
        report.residuals.append(Residual(str(alpha), r, allowed, r <= allowed,
                                         {"measure": got, "functional": want}))
    return report
