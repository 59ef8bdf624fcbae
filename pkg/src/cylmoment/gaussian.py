"""Gaussian cylinder measures given by a covariance operator.

The covariance is ``b`` with ``(x, y) = <b x, y>``: an explicit head block over
``x1..xK`` (diagonal or dense) and a diagonal tail ``b_k`` for ``k > K`` taken
from an analytic model.  Once the tail is known, summability of ``b_k``
decides whether the cylinder measure is sigma-additive.
"""

from __future__ import annotations

import enum
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .linalg import as_matrix, is_symmetric, ldl
from .measures import (
    Box,
    CylinderMeasure,
    FiniteMeasure,
    MeasureError,
    Probability,
    Seminorm,
    _affine_parts,
    index_set,
)
from .poly import Monomial, Poly
from .rational import as_fraction, iroot_exact, to_jsonable

DEFAULT_WICK_CAP = 16


class SpecError(ValueError):
    pass


class ZeroTailError(SpecError):
    """A tail of zeros gives ``ker b != {0}``."""


class WickDegreeError(ValueError):
    pass


# tail models ----------------------------------------------------------------


class TailModel(ABC):
    @abstractmethod
    def value(self, k: int) -> Fraction | float:
        """``b_k``; exact when the value is rational."""

    @abstractmethod
    def converges(self) -> bool | None:
        """Whether ``sum_k b_k`` is finite; None when no rule applies."""

    @abstractmethod
    def rule(self) -> str:
        ...

    def to_json(self) -> dict:
        raise SpecError(f"{type(self).__name__} has no JSON form")


@dataclass(frozen=True)
class PowerLaw(TailModel):
    """``b_k = C * k**(-p)``."""

    C: Fraction
    p: Fraction

    def __post_init__(self):
        object.__setattr__(self, "C", as_fraction(self.C))
        object.__setattr__(self, "p", as_fraction(self.p))
        if self.C <= 0 or self.p <= 0:
            raise SpecError("power-law tail needs C > 0 and p > 0")

    def value(self, k: int):
        num, den = self.p.numerator, self.p.denominator
        root = iroot_exact(k, den)
        if root is not None:
            return self.C / Fraction(root) ** num
        return float(self.C) * k ** (-float(self.p))

    def converges(self) -> bool:
        return self.p > 1

    def rule(self) -> str:
        verdict = "converges" if self.converges() else "diverges"
        return f"p-series: sum of {self.C}*k^(-{self.p}) {verdict} since p {'>' if self.p > 1 else '<='} 1"

    def to_json(self) -> dict:
        return {"model": "power", "C": to_jsonable(self.C), "p": to_jsonable(self.p)}


@dataclass(frozen=True)
class Geometric(TailModel):
    """``b_k = C * r**k`` with ``0 < r < 1``."""

    C: Fraction
    r: Fraction

    def __post_init__(self):
        object.__setattr__(self, "C", as_fraction(self.C))
        object.__setattr__(self, "r", as_fraction(self.r))
        if self.C <= 0 or not 0 < self.r < 1:
            raise SpecError("geometric tail needs C > 0 and 0 < r < 1")

    def value(self, k: int) -> Fraction:
        return self.C * self.r**k

    def converges(self) -> bool:
        return True

    def rule(self) -> str:
        return f"geometric series with ratio {self.r} < 1 converges"

    def to_json(self) -> dict:
        return {"model": "geometric", "C": to_jsonable(self.C), "r": to_jsonable(self.r)}


@dataclass(frozen=True)
class Constant(TailModel):
    c: Fraction

    def __post_init__(self):
        object.__setattr__(self, "c", as_fraction(self.c))
        if self.c <= 0:
            raise SpecError("constant tail needs c > 0")

    def value(self, k: int) -> Fraction:
        return self.c

    def converges(self) -> bool:
        return False

    def rule(self) -> str:
        return f"constant tail {self.c} > 0 is not summable"

    def to_json(self) -> dict:
        return {"model": "constant", "c": to_jsonable(self.c)}


class CustomTail(TailModel):
    """User-supplied ``b_k`` with no convergence certificate."""

    def __init__(self, fn: Callable[[int], Any], description: str = "custom tail"):
        self.fn = fn
        self.description = description

    def value(self, k: int):
        v = self.fn(k)
        if v <= 0:
            raise SpecError(f"custom tail gave b_{k} = {v} <= 0")
        return v if isinstance(v, float) else as_fraction(v)

    def converges(self) -> None:
        return None

    def rule(self) -> str:
        return f"{self.description}: no certified convergence rule"


def tail_from_json(obj: Mapping) -> TailModel:
    model = obj.get("model")
    if model == "power":
        return PowerLaw(as_fraction(obj["C"]), as_fraction(obj["p"]))
    if model == "geometric":
        return Geometric(as_fraction(obj["C"]), as_fraction(obj["r"]))
    if model == "constant":
        return Constant(as_fraction(obj["c"]))
    if model in ("zero", "zero_beyond_head"):
        raise ZeroTailError("a zero tail makes the covariance non-injective (ker b != {0})")
    raise SpecError(f"unknown tail model {model!r}")


# covariance spec --------------------------------------------------------------


class CovarianceSpec:
    """Covariance = head block on ``x1..xK`` plus diagonal tail for ``k > K``."""

    def __init__(self, head: Sequence[Sequence] | None, tail: TailModel, *, diagonal: bool):
        if not isinstance(tail, TailModel):
            raise SpecError("tail must be a TailModel")
        self.tail = tail
        self.diagonal = diagonal
        self._head = as_matrix(head or [])
        if diagonal:
            if any(d <= 0 for d in self.head_diagonal):
                raise SpecError("diagonal head entries must be positive")
        else:
            if not is_symmetric(self._head):
                raise SpecError("dense head must be symmetric")
            try:
                _, piv = ldl(self._head)
            except ZeroDivisionError:
                piv = [Fraction(0)]
            if any(p <= 0 for p in piv):
                raise SpecError("dense head is not positive definite")

    @classmethod
    def diag(cls, entries: Iterable, tail: TailModel) -> CovarianceSpec:
        entries = [as_fraction(e) for e in entries]
        n = len(entries)
        head = [[entries[i] if i == j else Fraction(0) for j in range(n)] for i in range(n)]
        return cls(head, tail, diagonal=True)

    @classmethod
    def dense(cls, matrix: Sequence[Sequence], tail: TailModel) -> CovarianceSpec:
        return cls([[as_fraction(x) for x in row] for row in matrix], tail, diagonal=False)

    @classmethod
    def from_json(cls, obj: Mapping) -> CovarianceSpec:
        if "tail" not in obj:
            raise SpecError("covariance spec needs a tail model")
        tail = tail_from_json(obj["tail"])
        head = obj.get("head", {"diag": []})
        if "diag" in head:
            return cls.diag(head["diag"], tail)
        if "dense" in head:
            return cls.dense(head["dense"], tail)
        raise SpecError("head must be {'diag': [...]} or {'dense': [[...]]}")

    def to_json(self) -> dict:
        if self.diagonal:
            head = {"diag": [to_jsonable(x) for x in self.head_diagonal]}
        else:
            head = {"dense": [[to_jsonable(x) for x in row] for row in self._head]}
        return {"head": head, "tail": self.tail.to_json()}

    @property
    def head_size(self) -> int:
        return len(self._head)

    @property
    def head_diagonal(self) -> list[Fraction]:
        return [self._head[i][i] for i in range(len(self._head))]

    def entry(self, i: int, j: int):
        """``(x_i, x_j)`` for 1-based indices."""
        if i < 1 or j < 1:
            raise SpecError("indices are 1-based")
        k = self.head_size
        if i <= k and j <= k:
            return self._head[i - 1][j - 1]
        if i == j:
            return self.tail.value(i)
        return Fraction(0)

    def variance(self, k: int):
        return self.entry(k, k)

    def covariance(self, indices: Iterable[int]) -> list[list]:
        idx = index_set(indices)
        return [[self.entry(i, j) for j in idx] for i in idx]

    def inner(self, y: Mapping[int, Any], z: Mapping[int, Any] | None = None):
        """``(y, z) = <b y, z>``; ``z`` defaults to ``y``."""
        z = y if z is None else z
        total: Fraction | float = Fraction(0)
        for i, yi in y.items():
            for j, zj in z.items():
                e = self.entry(i, j) if yi and zj else 0
                if not e:
                    continue
                if isinstance(e, float) or isinstance(total, float):
                    total = float(total) + float(yi) * float(e) * float(zj)
                else:
                    total += as_fraction(yi) * e * as_fraction(zj)
        return total

    def __repr__(self) -> str:
        kind = "diag" if self.diagonal else "dense"
        return f"CovarianceSpec({kind} head of size {self.head_size}, tail={self.tail!r})"


def _as_coeffs(y) -> dict[int, Any]:
    if isinstance(y, Poly):
        return y.linear_coefficients()
    return {int(k): v for k, v in dict(y).items()}


# wick / isserlis ----------------------------------------------------------------


def _check_cap(exps: Sequence[int], cap: int) -> None:
    if sum(exps) > cap:
        raise WickDegreeError(f"total degree {sum(exps)} exceeds the Wick cap {cap}")


def _integer_scaled(cov: Sequence[Sequence]) -> tuple[list[list], int | None]:
    if all(isinstance(x, (int, Fraction)) for row in cov for x in row):
        fr = [[Fraction(x) for x in row] for row in cov]
        den = math.lcm(*(x.denominator for row in fr for x in row)) if fr else 1
        return [[int(x * den) for x in row] for row in fr], den
    return [[float(x) for x in row] for row in cov], None


def wick_enumerate(cov: Sequence[Sequence], exps: Sequence[int], cap: int = DEFAULT_WICK_CAP):
    """``E[prod x_k^exps[k]]`` by summing over all perfect matchings.

    The monomial is expanded into a list of symbols (coordinate ``k`` repeated
    ``exps[k]`` times); each perfect matching of the list contributes the
    product of covariances of its pairs.
    """
    _check_cap(exps, cap)
    n = sum(exps)
    if n % 2:
        return Fraction(0)
    scaled, den = _integer_scaled(cov)
    symbols = tuple(k for k, e in enumerate(exps) for _ in range(e))

    def matchings(syms: tuple[int, ...]):
        if not syms:
            return 1
        first, rest = syms[0], syms[1:]
        total = 0
        for j, other in enumerate(rest):
            c = scaled[first][other]
            if c:
                total += c * matchings(rest[:j] + rest[j + 1:])
        return total

    total = matchings(symbols)
    if den is None:
        return float(total)
    return Fraction(total, den ** (n // 2))


def wick_recursive(cov: Sequence[Sequence], exps: Sequence[int], cap: int = DEFAULT_WICK_CAP):
    """``E[x^beta]`` by Gaussian integration by parts.

    ``E[x_i m] = sum_j C_ij E[d m / d x_j]``, memoized on exponent vectors.
    """
    _check_cap(exps, cap)
    n = sum(exps)
    if n % 2:
        return Fraction(0)
    scaled, den = _integer_scaled(cov)
    dim = len(exps)

    @lru_cache(maxsize=None)
    def moment(beta: tuple[int, ...]):
        if not any(beta):
            return 1
        if sum(beta) % 2:
            return 0
        i = next(k for k, e in enumerate(beta) if e)
        rest = list(beta)
        rest[i] -= 1
        total = 0
        for j in range(dim):
            mult = rest[j]
            c = scaled[i][j]
            if mult and c:
                lower = rest[:]
                lower[j] -= 1
                total += c * mult * moment(tuple(lower))
        return total

    total = moment(tuple(exps))
    if den is None:
        return float(total)
    return Fraction(total, den ** (n // 2))


def wick_moment(cov: Sequence[Sequence], exps: Sequence[int], cap: int = DEFAULT_WICK_CAP,
                method: str = "recursive"):
    if len(exps) != len(cov):
        raise ValueError("exponent vector and covariance have different sizes")
    if method == "recursive":
        return wick_recursive(cov, exps, cap)
    if method == "enumerate":
        return wick_enumerate(cov, exps, cap)
    raise ValueError(f"unknown method {method!r}")


# marginals and the cylinder measure ------------------------------------------------


def _normal_interval(lo: float | None, hi: float | None, sd: float) -> float:
    """``P(lo <= X <= hi)`` for ``X ~ N(0, sd^2)``, accurate in both tails."""
    if lo is not None and hi is not None and lo >= 0:
        s = sd * math.sqrt(2)
        return 0.5 * (math.erfc(lo / s) - math.erfc(hi / s))
    if hi is not None and lo is not None and hi <= 0:
        return _normal_interval(-hi, -lo, sd)
    s = sd * math.sqrt(2)
    lower_tail = 0.0 if lo is None else 0.5 * math.erfc(-lo / s)
    upper_tail = 0.0 if hi is None else 0.5 * math.erfc(hi / s)
    return 1.0 - lower_tail - upper_tail


class GaussianMarginal(FiniteMeasure):
    """Centered Gaussian on the coordinates ``indices`` with covariance ``cov``."""

    def __init__(self, indices: Iterable[int], cov: Sequence[Sequence], cap: int = DEFAULT_WICK_CAP):
        self.indices = index_set(indices)
        self.cov = [list(row) for row in cov]
        self.cap = cap
        self.exact_moments = all(isinstance(x, Fraction) for row in self.cov for x in row)
        n = len(self.indices)
        self.is_diagonal = all(not self.cov[i][j] for i in range(n) for j in range(n) if i != j)
        self._chol: np.ndarray | None = None

    def moment(self, alpha: Monomial):
        exps = alpha.dense(self.indices)
        active = [k for k, e in enumerate(exps) if e]
        if all(not self.cov[i][j] for i in active for j in active if i != j):
            # independent coordinates: no matchings to enumerate, so no cap either
            if any(exps[k] % 2 for k in active):
                return Fraction(0)
            out = Fraction(1) if self.exact_moments else 1.0
            for k in active:
                out *= self.cov[k][k] ** (exps[k] // 2) * math.prod(range(exps[k] - 1, 0, -2))
            return out
        return wick_moment(self.cov, exps, self.cap)

    def cholesky(self) -> np.ndarray:
        """Float Cholesky factor from the exact LDL^T of the covariance."""
        if self._chol is None:
            if self.exact_moments:
                low, d = ldl(self.cov)
                if any(x <= 0 for x in d):
                    raise MeasureError("covariance is singular")
                factor = np.array([[float(x) for x in row] for row in low]) * np.sqrt([float(x) for x in d])
            else:
                factor = np.linalg.cholesky(np.array(self.cov, dtype=float))
            if not np.all(np.isfinite(factor)) or np.any(np.diag(factor) <= 0):
                raise MeasureError("covariance is numerically singular after conversion")
            self._chol = factor
        return self._chol

    def sample(self, count: int, seed) -> np.ndarray:
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((count, len(self.indices)))
        return z @ self.cholesky().T

    def box_prob(self, box: Box, *, samples: int = 100_000, seed=None) -> Probability:
        self._check_box(box)
        if self.is_diagonal:
            p = 1.0
            for k, iv in enumerate(box.intervals):
                if iv.is_full:
                    continue
                if iv.is_empty:
                    return Probability(0.0)
                sd = math.sqrt(float(self.cov[k][k]))
                p *= _normal_interval(None if iv.lo is None else float(iv.lo),
                                      None if iv.hi is None else float(iv.hi), sd)
            return Probability(min(max(p, 0.0), 1.0))
        return super().box_prob(box, samples=samples, seed=seed)

    def tail_prob(self, t: Poly, a, **_) -> Probability:
        """Exact ``P(|chi(t)| >= a)``: ``chi(t)`` is 1-D Gaussian."""
        const, coeffs = _affine_parts(t, self.indices)
        n = len(coeffs)
        var = sum(coeffs[i] * self.cov[i][j] * coeffs[j] for i in range(n) for j in range(n))
        a, c0 = float(a), float(const)
        if var == 0:
            return Probability(1.0 if abs(c0) >= a else 0.0)
        inside = _normal_interval(-a - c0, a - c0, math.sqrt(float(var)))
        return Probability(max(0.0, 1.0 - inside))


class GaussianSeminorm(Seminorm):
    """``q(t) = sqrt((t, t))``."""

    def __init__(self, spec: CovarianceSpec):
        self.spec = spec

    def squared(self, t: Poly):
        return self.spec.inner(t.linear_coefficients())


class GaussianCylinderMeasure(CylinderMeasure):
    def __init__(self, spec: CovarianceSpec, cap: int = DEFAULT_WICK_CAP):
        self.spec = spec
        self.cap = cap
        self.seminorm = GaussianSeminorm(spec)

    def marginal(self, indices: Iterable[int]) -> GaussianMarginal:
        idx = index_set(indices)
        return GaussianMarginal(idx, self.spec.covariance(idx), self.cap)


def gaussian_marginal(spec: CovarianceSpec, indices: Iterable[int]) -> GaussianMarginal:
    return GaussianCylinderMeasure(spec).marginal(indices)


def sample(spec: CovarianceSpec, indices: Iterable[int], n: int, seed) -> np.ndarray:
    return gaussian_marginal(spec, indices).sample(n, seed)


# fourier transform -----------------------------------------------------------------


def fourier(spec: CovarianceSpec, y) -> float:
    """``exp(-(y, y)/2)`` for a finite coefficient vector (or linear Poly) ``y``."""
    q = spec.inner(_as_coeffs(y))
    if q == 0:
        return 1.0
    return math.exp(-float(q) / 2)


def empirical_characteristic(points: np.ndarray, indices: Sequence[int], y) -> tuple[float, float]:
    """Sample mean of ``cos(<x, y>)`` and its standard error.

    The imaginary part ``sin`` averages to zero for a centered Gaussian and is
    not used.
    """
    coeffs = _as_coeffs(y)
    vec = np.array([float(coeffs.get(i, 0)) for i in indices])
    vals = np.cos(points @ vec)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


# sigma-additivity -------------------------------------------------------------------


class Verdict(str, enum.Enum):
    SIGMA_ADDITIVE = "SigmaAdditive"
    CYLINDER_ONLY = "CylinderOnly"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class SigmaAdditivityVerdict:
    verdict: Verdict
    justification: str

    def to_dict(self) -> dict:
        return {"verdict": self.verdict.value, "justification": self.justification}


def classify_sigma_additivity(spec: CovarianceSpec) -> SigmaAdditivityVerdict:
    """Sigma-additive iff ``b`` is trace class, i.e. ``sum_k b_k < inf``.

    The head contributes a finite sum, so the tail model alone decides.
    """
    head_trace = sum(spec.head_diagonal, Fraction(0))
    conv = spec.tail.converges()
    prefix = f"head trace {to_jsonable(head_trace)} is finite; tail: {spec.tail.rule()}"
    if conv is None:
        return SigmaAdditivityVerdict(Verdict.INCONCLUSIVE, prefix)
    if conv:
        return SigmaAdditivityVerdict(Verdict.SIGMA_ADDITIVE, prefix + "; b is trace class")
    return SigmaAdditivityVerdict(Verdict.CYLINDER_ONLY, prefix + "; b is not trace class")
