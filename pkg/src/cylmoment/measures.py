"""Cylinder measures as projective families of finite-dimensional marginals.

A cylinder set is described by a finite index set ``F`` (the coordinates
``x_i, i in F``) and a box over those coordinates.  A :class:`CylinderMeasure`
hands out a :class:`FiniteMeasure` for every ``F``; its probability of a
cylinder set is the marginal probability of the base box.
"""

from __future__ import annotations

import itertools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .poly import Monomial, Poly, monomials_up_to
from .rational import as_fraction, sqrt_exact, to_jsonable

IndexSet = tuple[int, ...]

EXACT_TOL = 1e-12


class MeasureError(ValueError):
    pass


class MarginalUnavailable(MeasureError):
    """The backend cannot produce the requested marginal or quantity."""


class PartitionError(MeasureError):
    pass


class NoSeminormError(MeasureError):
    pass


def index_set(indices: Iterable[int]) -> IndexSet:
    out = tuple(sorted(set(int(i) for i in indices)))
    if not out:
        raise MeasureError("index set must be nonempty")
    if out[0] < 1:
        raise MeasureError(f"variable indices are 1-based, got {out[0]}")
    return out


def spawn_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    """Independent, reproducible substreams for ``count`` parallel tasks."""
    return np.random.SeedSequence(seed).spawn(count)


# boxes ------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """Interval with rational or infinite (None) endpoints."""

    lo: Fraction | None = None
    hi: Fraction | None = None
    lo_open: bool = False
    hi_open: bool = False

    def __post_init__(self):
        lo = None if self.lo is None else as_fraction(self.lo)
        hi = None if self.hi is None else as_fraction(self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo is not None and hi is not None and lo > hi:
            raise MeasureError(f"interval lower endpoint {lo} exceeds upper {hi}")

    @property
    def is_full(self) -> bool:
        return self.lo is None and self.hi is None

    @property
    def is_empty(self) -> bool:
        return self.lo is not None and self.lo == self.hi and (self.lo_open or self.hi_open)

    def contains(self, x) -> bool:
        if self.lo is not None:
            if x < self.lo or (self.lo_open and x == self.lo):
                return False
        if self.hi is not None:
            if x > self.hi or (self.hi_open and x == self.hi):
                return False
        return True

    def mask(self, xs: np.ndarray) -> np.ndarray:
        ok = np.ones(xs.shape, dtype=bool)
        if self.lo is not None:
            lo = float(self.lo)
            ok &= xs > lo if self.lo_open else xs >= lo
        if self.hi is not None:
            hi = float(self.hi)
            ok &= xs < hi if self.hi_open else xs <= hi
        return ok

    def to_json(self) -> dict:
        out: dict[str, Any] = {
            "lo": None if self.lo is None else _num_json(self.lo),
            "hi": None if self.hi is None else _num_json(self.hi),
        }
        if self.lo_open:
            out["lo_open"] = True
        if self.hi_open:
            out["hi_open"] = True
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> Interval:
        return cls(
            lo=None if obj.get("lo") is None else as_fraction(obj["lo"]),
            hi=None if obj.get("hi") is None else as_fraction(obj["hi"]),
            lo_open=bool(obj.get("lo_open", False)),
            hi_open=bool(obj.get("hi_open", False)),
        )


def _num_json(x: Fraction):
    f = float(x)
    return f if Fraction(repr(f)) == x else to_jsonable(x)


@dataclass(frozen=True)
class Box:
    intervals: tuple[Interval, ...]

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(self.intervals))

    @classmethod
    def full(cls, dim: int) -> Box:
        return cls(tuple(Interval() for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.intervals)

    @property
    def is_full(self) -> bool:
        return all(iv.is_full for iv in self.intervals)

    @property
    def is_empty(self) -> bool:
        return any(iv.is_empty for iv in self.intervals)

    def contains(self, point: Sequence) -> bool:
        return all(iv.contains(x) for iv, x in zip(self.intervals, point))

    def mask(self, points: np.ndarray) -> np.ndarray:
        ok = np.ones(points.shape[0], dtype=bool)
        for k, iv in enumerate(self.intervals):
            if not iv.is_full:
                ok &= iv.mask(points[:, k])
        return ok


@dataclass(frozen=True)
class CylinderSet:
    """``{chi : (chi(x_i))_{i in indices} in box}``."""

    indices: IndexSet
    box: Box

    def __post_init__(self):
        object.__setattr__(self, "indices", index_set(self.indices))
        if self.box.dim != len(self.indices):
            raise MeasureError(
                f"box has {self.box.dim} coordinates for {len(self.indices)} indices"
            )

    def extend(self, indices: Iterable[int]) -> CylinderSet:
        """Same set, described over a larger generating index set."""
        big = index_set(indices)
        if not set(self.indices) <= set(big):
            raise MeasureError(f"{big} does not contain {self.indices}")
        by_index = dict(zip(self.indices, self.box.intervals))
        return CylinderSet(big, Box(tuple(by_index.get(i, Interval()) for i in big)))

    def contains(self, chi: Mapping[int, Any]) -> bool:
        return self.box.contains([chi.get(i, 0) for i in self.indices])

    def to_json(self) -> dict:
        return {"indices": list(self.indices), "box": [iv.to_json() for iv in self.box.intervals]}

    @classmethod
    def from_json(cls, obj: Mapping) -> CylinderSet:
        return cls(tuple(obj["indices"]), Box(tuple(Interval.from_json(iv) for iv in obj["box"])))


# probabilities with error bars ------------------------------------------


@dataclass(frozen=True)
class Probability:
    """A probability value; ``stderr == 0`` and ``exact`` for closed forms."""

    value: float
    stderr: float = 0.0
    exact: bool = True

    def __add__(self, other: Probability) -> Probability:
        return Probability(
            self.value + other.value,
            math.hypot(self.stderr, other.stderr),
            self.exact and other.exact,
        )

    @classmethod
    def mc(cls, hits: np.ndarray) -> Probability:
        n = hits.size
        p = float(hits.mean())
        sd = float(hits.std(ddof=1)) if n > 1 else 0.0
        return cls(p, sd / math.sqrt(n), exact=False)

    def describe(self) -> dict:
        if self.exact:
            return {"value": self.value, "error": "exact"}
        return {"value": self.value, "error": {"mc_stderr": self.stderr}}


# finite-dimensional marginals -------------------------------------------


class FiniteMeasure(ABC):
    """A normalized measure on the coordinates ``indices``."""

    indices: IndexSet
    #: True when ``moment`` returns exact rationals
    exact_moments: bool = True

    @abstractmethod
    def moment(self, alpha: Monomial) -> Fraction | float:
        ...

    def sample(self, count: int, seed: int | np.random.SeedSequence) -> np.ndarray:
        raise MarginalUnavailable(f"{type(self).__name__} cannot be sampled")

    def box_prob(
        self, box: Box, *, samples: int = 100_000, seed: int | np.random.SeedSequence | None = None
    ) -> Probability:
        """Probability of ``box``; Monte Carlo unless a subclass knows better."""
        self._check_box(box)
        if box.is_full:
            return Probability(1.0)
        if box.is_empty and not self.has_atoms:
            return Probability(0.0)
        if seed is None:
            raise MeasureError("a seed is required for a Monte-Carlo probability")
        pts = self.sample(samples, seed)
        return Probability.mc(box.mask(pts).astype(float))

    def tail_prob(
        self, t: Poly, a, *, samples: int = 100_000, seed: int | np.random.SeedSequence | None = None
    ) -> Probability:
        """``P(|chi(t)| >= a)`` for an affine ``t`` over ``indices``."""
        const, coeffs = _affine_parts(t, self.indices)
        if seed is None:
            raise MeasureError("a seed is required for a Monte-Carlo probability")
        pts = self.sample(samples, seed)
        vals = float(const) + pts @ np.array([float(c) for c in coeffs])
        return Probability.mc((np.abs(vals) >= float(a)).astype(float))

    has_atoms = False

    def expectation(self, f: Poly):
        return sum((c * self.moment(m) for m, c in f.terms.items()), Fraction(0))

    def _check_box(self, box: Box) -> None:
        if box.dim != len(self.indices):
            raise MeasureError(f"box dimension {box.dim} != marginal dimension {len(self.indices)}")


def _affine_parts(t: Poly, indices: IndexSet) -> tuple[Fraction, list[Fraction]]:
    if t.degree > 1:
        raise MeasureError(f"{t} has degree {t.degree}; an affine form is required")
    pos = {i: k for k, i in enumerate(indices)}
    coeffs = [Fraction(0)] * len(indices)
    const = Fraction(0)
    for mono, c in t.terms.items():
        if mono.is_unit():
            const = c
            continue
        (var, _), = mono.pairs
        if var not in pos:
            raise MeasureError(f"x{var} is outside the marginal indices {indices}")
        coeffs[pos[var]] = c
    return const, coeffs


class AtomicMarginal(FiniteMeasure):
    """Finite sum of weighted point masses on ``indices``."""

    has_atoms = True

    def __init__(self, indices: Iterable[int], points: Sequence[Sequence], weights: Sequence):
        self.indices = index_set(indices)
        self.points = tuple(tuple(p) for p in points)
        self.weights = tuple(weights)
        if len(self.points) != len(self.weights):
            raise MeasureError("points and weights differ in length")
        if any(len(p) != len(self.indices) for p in self.points):
            raise MeasureError("atom dimension does not match the index set")
        if any(w < 0 for w in self.weights):
            raise MeasureError("negative atom weight")
        self.exact_moments = all(
            isinstance(v, (int, Fraction)) for p in self.points for v in p
        ) and all(isinstance(w, (int, Fraction)) for w in self.weights)
        total = sum(self.weights)
        if abs(total - 1) > (0 if self.exact_moments else 1e-12):
            raise MeasureError(f"atom weights sum to {total}, not 1")

    def moment(self, alpha: Monomial):
        exps = alpha.dense(self.indices)
        total = Fraction(0) if self.exact_moments else 0.0
        for p, w in zip(self.points, self.weights):
            term = w
            for x, e in zip(p, exps):
                if e:
                    term = term * x**e
            total += term
        return total

    def box_prob(self, box: Box, **_) -> Probability:
        self._check_box(box)
        return Probability(float(sum(w for p, w in zip(self.points, self.weights) if box.contains(p))))

    def tail_prob(self, t: Poly, a, **_) -> Probability:
        const, coeffs = _affine_parts(t, self.indices)
        a = as_fraction(a) if self.exact_moments else float(a)
        hit = 0
        for p, w in zip(self.points, self.weights):
            v = const + sum(c * x for c, x in zip(coeffs, p))
            if abs(v) >= a:
                hit += w
        return Probability(float(hit))

    def sample(self, count: int, seed) -> np.ndarray:
        rng = np.random.default_rng(seed)
        w = np.array([float(x) for x in self.weights])
        pts = np.array([[float(x) for x in p] for p in self.points])
        return pts[rng.choice(len(pts), size=count, p=w / w.sum())]


class TableMarginal(FiniteMeasure):
    """Marginal known only through a finite table of exact moments."""

    def __init__(self, indices: Iterable[int], moments: Mapping[Monomial, Fraction], max_degree: int):
        self.indices = index_set(indices)
        self.max_degree = max_degree
        self._moments = dict(moments)

    def moment(self, alpha: Monomial) -> Fraction:
        if not alpha.support <= set(self.indices):
            raise MarginalUnavailable(f"{alpha} is outside indices {self.indices}")
        if alpha.degree > self.max_degree:
            raise MarginalUnavailable(f"{alpha} exceeds table degree {self.max_degree}")
        try:
            return self._moments[alpha]
        except KeyError:
            raise MarginalUnavailable(f"moment of {alpha} is not in the table") from None

    def box_prob(self, box: Box, **kw) -> Probability:
        self._check_box(box)
        if box.is_full:
            return Probability(1.0)
        raise MarginalUnavailable("a moment table does not determine box probabilities")


# cylinder measures ------------------------------------------------------


class Seminorm(ABC):
    """Seminorm on linear forms ``t = sum c_i x_i``."""

    @abstractmethod
    def squared(self, t: Poly) -> Fraction | float:
        ...

    def __call__(self, t: Poly) -> float:
        return math.sqrt(float(self.squared(t)))


class WeightedSeminorm(Seminorm):
    """``q(sum c_i x_i) = sqrt(sum w_i c_i^2)``; ``default`` weights the rest."""

    def __init__(self, weights: Mapping[int, Any], default: Any = None):
        self.weights = {int(i): as_fraction(w) for i, w in weights.items()}
        self.default = None if default is None else as_fraction(default)
        if any(w < 0 for w in self.weights.values()) or (self.default is not None and self.default < 0):
            raise MeasureError("seminorm weights must be nonnegative")

    def weight(self, i: int) -> Fraction:
        if i in self.weights:
            return self.weights[i]
        if self.default is None:
            raise MeasureError(f"no seminorm weight for x{i}")
        return self.default

    def squared(self, t: Poly) -> Fraction:
        return sum((self.weight(i) * c * c for i, c in t.linear_coefficients().items()), Fraction(0))


class CylinderMeasure(ABC):
    seminorm: Seminorm | None = None

    @abstractmethod
    def marginal(self, indices: Iterable[int]) -> FiniteMeasure:
        ...

    def expectation(self, f: Poly):
        """Integral of ``f`` against the marginal on its support."""
        if f.is_zero():
            return Fraction(0)
        supp = f.support or {1}
        return self.marginal(supp).expectation(f)

    def certify_seminorm(self, probes: Iterable[Poly]) -> list[tuple[Poly, Any, Any]]:
        """Check ``E[t^2] <= q(t)^2`` on ``probes``; returns the violations."""
        if self.seminorm is None:
            raise NoSeminormError("measure carries no seminorm")
        bad = []
        for t in probes:
            lhs, rhs = self.expectation(t * t), self.seminorm.squared(t)
            if lhs > rhs * (1 + 1e-12 if isinstance(rhs, float) or isinstance(lhs, float) else 1):
                bad.append((t, lhs, rhs))
        return bad


class ProjectiveFamily(CylinderMeasure):
    """Explicitly listed marginals, one per index set."""

    def __init__(self, marginals: Iterable[FiniteMeasure], seminorm: Seminorm | None = None):
        self._marginals = {m.indices: m for m in marginals}
        self.seminorm = seminorm

    def marginal(self, indices: Iterable[int]) -> FiniteMeasure:
        key = index_set(indices)
        try:
            return self._marginals[key]
        except KeyError:
            raise MarginalUnavailable(f"no marginal stored for {key}") from None


# checks -----------------------------------------------------------------


@dataclass
class Residual:
    name: str
    residual: Any
    tolerance: Any
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"name": self.name, "residual": to_jsonable(self.residual),
               "tolerance": to_jsonable(self.tolerance), "pass": self.passed}
        if self.detail:
            out.update(to_jsonable(self.detail))
        return out


@dataclass
class CheckReport:
    check: str
    residuals: list[Residual] = field(default_factory=list)
    result: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.residuals)

    def failures(self) -> list[Residual]:
        return [r for r in self.residuals if not r.passed]

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "result": to_jsonable(self.result),
            "pass": self.passed,
            "residuals": [r.to_dict() for r in self.residuals],
        }


def cyl_prob(mu: CylinderMeasure, n: CylinderSet, *, samples: int = 100_000, seed=None) -> Probability:
    return mu.marginal(n.indices).box_prob(n.box, samples=samples, seed=seed)


def _residual(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return abs(a - b)
    return abs(float(a) - float(b))


def check_consistency(
    mu: CylinderMeasure, small: Iterable[int], big: Iterable[int], max_degree: int, *, tol: float = 0.0
) -> CheckReport:
    """Compare moments of the ``small`` marginal with those of ``big`` pushed forward."""
    f, g = index_set(small), index_set(big)
    if not set(f) <= set(g):
        raise MeasureError(f"{f} is not a subset of {g}")
    mf, mg = mu.marginal(f), mu.marginal(g)
    exact = mf.exact_moments and mg.exact_moments
    report = CheckReport("consistency", result={"F": list(f), "G": list(g), "max_degree": max_degree})
    for alpha in monomials_up_to(f, max_degree):
        lhs, rhs = mf.moment(alpha), mg.moment(alpha)
        r = _residual(lhs, rhs)
        allowed = 0 if exact else tol
        report.residuals.append(
            Residual(str(alpha), r, allowed, r <= allowed, {"F_side": lhs, "G_side": rhs})
        )
    return report


def _cell_representatives(intervals: list[Interval]) -> list[Fraction]:
    pts = sorted({e for iv in intervals for e in (iv.lo, iv.hi) if e is not None})
    if not pts:
        return [Fraction(0)]
    reps = [pts[0] - 1]
    for a, b in zip(pts, pts[1:]):
        reps += [a, (a + b) / 2]
    reps += [pts[-1], pts[-1] + 1]
    return reps


def validate_partition(whole: Box, partition: Sequence[Box]) -> None:
    """Raise :class:`PartitionError` unless ``partition`` tiles ``whole`` exactly.

    Every box is constant on the cells of the grid spanned by all endpoints, so
    it suffices to test one representative point per cell.
    """
    for b in partition:
        if b.dim != whole.dim:
            raise PartitionError("partition boxes differ in dimension from the whole")
    axes = [
        _cell_representatives([whole.intervals[k]] + [b.intervals[k] for b in partition])
        for k in range(whole.dim)
    ]
    for point in itertools.product(*axes):
        owners = [n for n, b in enumerate(partition) if b.contains(point)]
        inside = whole.contains(point)
        if len(owners) > 1:
            raise PartitionError(f"cells {owners} overlap at {[str(x) for x in point]}")
        if inside and not owners:
            raise PartitionError(f"gap at {[str(x) for x in point]}")
        if owners and not inside:
            raise PartitionError(f"cell {owners[0]} leaves the whole box at {[str(x) for x in point]}")


def check_axioms(
    mu: CylinderMeasure,
    indices: Iterable[int],
    partition: Sequence[Box],
    whole: Box,
    seed: int | None = None,
    *,
    samples: int = 100_000,
    sigmas: float = 4.0,
) -> CheckReport:
    """Range and finite additivity of ``mu`` over a box partition of ``whole``."""
    f = index_set(indices)
    validate_partition(whole, partition)
    marg = mu.marginal(f)
    seeds = spawn_seeds(seed, len(partition) + 1) if seed is not None else [None] * (len(partition) + 1)
    p_whole = marg.box_prob(whole, samples=samples, seed=seeds[0])
    cells = [marg.box_prob(b, samples=samples, seed=s) for b, s in zip(partition, seeds[1:])]
    report = CheckReport("axioms", result={"indices": list(f), "whole": p_whole.describe(),
                                           "cells": [c.describe() for c in cells]})
    for k, c in enumerate(cells + [p_whole]):
        name = f"range[{k}]" if k < len(cells) else "range[whole]"
        out = max(0.0, -c.value, c.value - 1.0)
        report.residuals.append(Residual(name, out, 0.0, out == 0.0))
    total = Probability(0.0)
    for c in cells:
        total = total + c
    r = abs(total.value - p_whole.value)
    if total.exact and p_whole.exact:
        tol = EXACT_TOL
    else:
        tol = sigmas * math.hypot(total.stderr, p_whole.stderr)
    report.residuals.append(Residual("additivity", r, tol, r <= tol))
    return report


def check_normalization(mu: CylinderMeasure, indices: Iterable[int]) -> CheckReport:
    f = index_set(indices)
    marg = mu.marginal(f)
    report = CheckReport("normalization", result={"indices": list(f)})
    m0 = marg.moment(Monomial())
    r = _residual(m0, Fraction(1))
    ok = r == 0 if marg.exact_moments else r <= EXACT_TOL
    report.residuals.append(Residual("moment(1)", r, 0 if marg.exact_moments else EXACT_TOL, ok, {"value": m0}))
    p = marg.box_prob(Box.full(len(f)))
    report.residuals.append(Residual("prob(full)", abs(p.value - 1), 0, p.value == 1.0))
    return report


def continuity_witness(mu: CylinderMeasure, eps, a) -> float:
    """Radius ``delta`` with ``q(t) <= delta  =>  P(|chi(t)| >= a) <= eps``.

    Chebyshev gives ``P(|chi(t)| >= a) <= E[t^2]/a^2 <= q(t)^2/a^2``, hence
    ``delta = a*sqrt(eps)``.
    """
    if mu.seminorm is None:
        raise NoSeminormError("continuity needs a certified seminorm")
    eps_q, a_q = as_fraction(eps), as_fraction(a)
    if eps_q <= 0 or a_q <= 0:
        raise MeasureError("eps and a must be positive")
    root = sqrt_exact(eps_q)
    if root is not None:
        return float(a_q * root)
    return float(a_q) * math.sqrt(float(eps_q))


def chebyshev_bound(functional, t: Poly, a) -> Fraction:
    """``L(t^2)/a^2``, an upper bound for ``P(|chi(t)| >= a)``.

    ``functional`` is anything with ``expectation(f)`` (a cylinder measure or a
    moment functional).
    """
    if t.degree > 1:
        raise MeasureError(f"{t} has degree {t.degree}; need degree <= 1")
    a_q = as_fraction(a)
    if a_q <= 0:
        raise MeasureError("a must be positive")
    if t.is_zero():
        return Fraction(0)
    second = functional.expectation(t * t)
    if isinstance(second, Fraction):
        return second / (a_q * a_q)
    return second / float(a_q) ** 2


def tail_probability(mu: CylinderMeasure, t: Poly, a, *, samples: int = 100_000, seed=None) -> Probability:
    if t.degree < 1:
        c = t.coefficient(Monomial())
        return Probability(1.0 if abs(c) >= as_fraction(a) else 0.0)
    return mu.marginal(t.support).tail_prob(t, a, samples=samples, seed=seed)
