import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cylmoment.gaussian import Constant, CovarianceSpec, GaussianCylinderMeasure, PowerLaw
from cylmoment.measures import (
    AtomicMarginal,
    Box,
    CylinderSet,
    Interval,
    MeasureError,
    NoSeminormError,
    PartitionError,
    Probability,
    ProjectiveFamily,
    TableMarginal,
    WeightedSeminorm,
    chebyshev_bound,
    check_axioms,
    check_consistency,
    check_normalization,
    continuity_witness,
    cyl_prob,
    tail_probability,
    validate_partition,
)
from cylmoment.poly import Monomial, Poly, monomials_up_to

from oracles import normal_cdf, normal_interval

F = Fraction
STD = GaussianCylinderMeasure(CovarianceSpec.diag([1], Constant(1)))
D14 = GaussianCylinderMeasure(CovarianceSpec.diag([1, 4], Constant(1)))
D11 = GaussianCylinderMeasure(CovarianceSpec.diag([1, 1], Constant(1)))
DENSE = GaussianCylinderMeasure(CovarianceSpec.dense([[2, "1/2", 0], ["1/2", 1, "1/3"], [0, "1/3", 1]], PowerLaw(1, 2)))


def iv(lo=None, hi=None, **kw):
    return Interval(lo, hi, **kw)


# cylinder probabilities ---------------------------------------------------------


def test_full_space_has_probability_one():
    for mu, idx in [(STD, (1,)), (D14, (1, 2)), (DENSE, (1, 2, 3))]:
        p = cyl_prob(mu, CylinderSet(idx, Box.full(len(idx))))
        assert p.value == 1.0 and p.exact


def test_zero_width_open_interval_is_empty():
    n = CylinderSet((1,), Box((iv(0, 0, lo_open=True),)))
    assert cyl_prob(STD, n).value == 0.0


def test_reversed_interval_rejected():
    with pytest.raises(MeasureError):
        Interval(1, 0)


def test_standard_interval_probability():
    n = CylinderSet((1,), Box((iv(F("-1.96"), F("1.96")),)))
    p = cyl_prob(STD, n)
    assert p.value == pytest.approx(normal_interval(-1.96, 1.96), abs=1e-4)
    assert p.value == pytest.approx(0.95, abs=1e-4)


def test_cylinder_json_roundtrip():
    obj = {"indices": [1, 2], "box": [{"lo": -1.96, "hi": 1.96}, {"lo": None, "hi": 0, "hi_open": True}]}
    n = CylinderSet.from_json(obj)
    assert n.box.intervals[1].hi_open and n.box.intervals[0].lo == F("-1.96")
    assert CylinderSet.from_json(n.to_json()) == n


def test_extension_preserves_semantics():
    n = CylinderSet((2,), Box((iv(-1, 2, hi_open=True),)))
    big = n.extend((1, 2, 5))
    rnd = random.Random(2)
    for _ in range(200):
        chi = {i: F(rnd.randint(-30, 30), 10) for i in (1, 2, 5)}
        assert n.contains(chi) == big.contains(chi)
    p_small = cyl_prob(D14, CylinderSet((2,), Box((iv(-1, 2),))))
    p_big = cyl_prob(D14, CylinderSet((2,), Box((iv(-1, 2),))).extend((1, 2)))
    assert p_small.value == pytest.approx(p_big.value, abs=1e-15)


def test_mc_probability_has_error_bar():
    n = CylinderSet((1, 2), Box((iv(0), iv(0))))
    p = cyl_prob(DENSE, n, samples=20000, seed=1)
    assert not p.exact and p.stderr > 0
    # orthant probability for correlation rho: 1/4 + asin(rho)/(2 pi)
    rho = 0.5 / math.sqrt(2)
    assert abs(p.value - (0.25 + math.asin(rho) / (2 * math.pi))) <= 4 * p.stderr
    with pytest.raises(MeasureError):
        cyl_prob(DENSE, n)


def test_error_bars_add_in_quadrature():
    s = Probability(0.2, 0.03, False) + Probability(0.3, 0.04, False)
    assert s.value == pytest.approx(0.5) and s.stderr == pytest.approx(0.05)
    assert (Probability(0.1) + Probability(0.2)).exact


def _random_box(rnd, dim):
    out = []
    for _ in range(dim):
        a, b = sorted(F(rnd.randint(-20, 20), 10) for _ in range(2))
        out.append(iv(a, b))
    return Box(tuple(out))


def test_monotone_in_nested_boxes():
    rnd = random.Random(9)
    for _ in range(10):
        inner = _random_box(rnd, 2)
        outer = Box(tuple(iv(i.lo - F(rnd.randint(0, 5), 10), i.hi + F(rnd.randint(0, 5), 10)) for i in inner.intervals))
        for mu in (D14, DENSE):
            seed = rnd.randint(0, 10**6)
            a = cyl_prob(mu, CylinderSet((1, 2), inner), samples=20000, seed=seed)
            b = cyl_prob(mu, CylinderSet((1, 2), outer), samples=20000, seed=seed + 1)
            assert a.value <= b.value + 4 * math.hypot(a.stderr, b.stderr)


# consistency --------------------------------------------------------------------


def test_consistency_gaussian_diag():
    rep = check_consistency(D14, [1], [1, 2], 2)
    byname = {r.name: r for r in rep.residuals}
    assert byname["x1^2"].residual == 0
    assert byname["x1^2"].detail == {"F_side": 1, "G_side": 1}
    assert rep.passed


def test_consistency_identity():
    rep = check_consistency(DENSE, [1, 3], [1, 3], 4)
    assert rep.passed and all(r.residual == 0 for r in rep.residuals)


def test_consistency_requires_subset():
    with pytest.raises(MeasureError):
        check_consistency(D14, [1, 3], [1, 2], 2)


def _table(indices, moments, degree):
    return TableMarginal(indices, {Monomial.from_dense(indices, e): F(v) for e, v in moments.items()}, degree)


def test_consistency_flags_corrupted_table():
    small = _table((1,), {(0,): 1, (1,): 0, (2,): 1}, 2)
    good = {(0, 0): 1, (1, 0): 0, (0, 1): 0, (2, 0): 1, (1, 1): 0, (0, 2): 4}
    bad = dict(good)
    bad[(2, 0)] = F(3, 2)
    assert check_consistency(ProjectiveFamily([small, _table((1, 2), good, 2)]), [1], [1, 2], 2).passed
    rep = check_consistency(ProjectiveFamily([small, _table((1, 2), bad, 2)]), [1], [1, 2], 2)
    assert not rep.passed
    assert [r.name for r in rep.failures()] == ["x1^2"]
    assert rep.failures()[0].residual == F(1, 2)


def test_three_level_projective_consistency():
    for mu in (DENSE, GaussianCylinderMeasure(CovarianceSpec.diag([3, "1/2"], PowerLaw(2, 3)))):
        f, g, h = [2], [2, 3], [1, 2, 3, 4]
        mf, mg, mh = mu.marginal(f), mu.marginal(g), mu.marginal(h)
        for alpha in monomials_up_to(f, 6):
            assert mf.moment(alpha) == mg.moment(alpha) == mh.moment(alpha)
        for alpha in monomials_up_to(g, 4):
            assert mg.moment(alpha) == mh.moment(alpha)


def test_atomic_consistency():
    big = AtomicMarginal((1, 2), [(0, 1), (1, -1), (2, 0)], [F(1, 2), F(1, 3), F(1, 6)])
    small = AtomicMarginal((1,), [(0,), (1,), (2,)], [F(1, 2), F(1, 3), F(1, 6)])
    assert check_consistency(ProjectiveFamily([small, big]), [1], [1, 2], 5).passed


# axioms -------------------------------------------------------------------------


def test_half_line_split():
    rep = check_axioms(STD, [1], [Box((iv(None, 0),)), Box((iv(0, None, lo_open=True),))], Box.full(1))
    assert rep.passed
    assert rep.result["cells"][0]["value"] == pytest.approx(0.5, abs=1e-15)
    assert rep.result["cells"][0]["error"] == "exact"


def test_single_cell_partition():
    whole = Box((iv(-1, 2),))
    assert check_axioms(STD, [1], [whole], whole).passed


def test_quadrants_of_unit_square():
    whole = Box((iv(0, 1), iv(0, 1)))
    h = F(1, 2)
    cells = [
        Box((iv(0, h), iv(0, h))),
        Box((iv(h, 1, lo_open=True), iv(0, h))),
        Box((iv(0, h), iv(h, 1, lo_open=True))),
        Box((iv(h, 1, lo_open=True), iv(h, 1, lo_open=True))),
    ]
    rep = check_axioms(D11, [1, 2], cells, whole)
    assert rep.passed
    res = [r for r in rep.residuals if r.name == "additivity"][0]
    assert res.residual <= 1e-12
    want = normal_interval(0, 0.5) ** 2
    assert rep.result["cells"][0]["value"] == pytest.approx(want, abs=1e-13)
    assert rep.result["whole"]["value"] == pytest.approx(normal_interval(0, 1) ** 2, abs=1e-13)


def test_axioms_mc_backend():
    whole = Box((iv(-1, 1), iv(None, None)))
    cells = [Box((iv(-1, 0), iv())), Box((iv(0, 1, lo_open=True), iv()))]
    rep = check_axioms(DENSE, [1, 2], cells, whole, seed=5, samples=20000)
    assert rep.passed
    add = [r for r in rep.residuals if r.name == "additivity"][0]
    assert add.tolerance > 0


@pytest.mark.parametrize(
    "cells, what",
    [
        ([Box((iv(None, 0),)), Box((iv(0, None),))], "overlap"),
        ([Box((iv(None, 0, hi_open=True),)), Box((iv(0, None, lo_open=True),))], "gap"),
        ([Box((iv(None, 1),))], "gap"),
    ],
)
def test_invalid_partitions(cells, what):
    with pytest.raises(PartitionError, match=what):
        validate_partition(Box.full(1), cells)


def test_partition_spilling_outside():
    with pytest.raises(PartitionError, match="leaves"):
        validate_partition(Box((iv(0, 1),)), [Box((iv(0, 2),))])


# normalization, continuity, chebyshev ------------------------------------------


def test_normalization():
    for mu, idx in [(STD, [1]), (D14, [1, 2]), (DENSE, [1, 2, 3]), (DENSE, [7, 40])]:
        assert check_normalization(mu, idx).passed


def test_continuity_witness_values():
    assert continuity_witness(STD, F(1, 25), 1) == pytest.approx(0.2, abs=1e-15)
    assert continuity_witness(STD, 0.04, 1) == pytest.approx(0.2, abs=1e-15)
    assert continuity_witness(STD, 1, 1) == 1.0
    assert continuity_witness(STD, F(1, 4), 3) == 1.5
    with pytest.raises(NoSeminormError):
        continuity_witness(ProjectiveFamily([]), 0.1, 1)


def test_continuity_contract_on_standard_gaussian():
    delta = continuity_witness(STD, 0.04, 1)
    t = Poly.linear({1: F(1, 5)})
    assert STD.seminorm(t) == pytest.approx(delta)
    p = tail_probability(STD, t, 1).value
    want = 2 * (1 - normal_cdf(5.0))
    assert p == pytest.approx(want, rel=1e-6)
    assert p == pytest.approx(5.7e-7, rel=0.02)
    assert p <= 0.04


def test_gaussian_seminorm_certified():
    rnd = random.Random(4)
    probes = [Poly.linear({i: F(rnd.randint(-5, 5), rnd.randint(1, 4)) for i in (1, 2, 3, 6)}) for _ in range(20)]
    assert DENSE.certify_seminorm(probes) == []
    weighted = ProjectiveFamily([AtomicMarginal((1,), [(-1,), (1,)], [F(1, 2), F(1, 2)])],
                                WeightedSeminorm({1: F(1, 2)}))
    assert weighted.certify_seminorm([Poly.var(1)]) != []


def test_chebyshev_examples():
    assert chebyshev_bound(STD, Poly.var(1), 2) == F(1, 4)
    assert tail_probability(STD, Poly.var(1), 2).value == pytest.approx(2 * (1 - normal_cdf(2.0)), abs=1e-12)
    assert tail_probability(STD, Poly.var(1), 2).value == pytest.approx(0.0455, abs=1e-4)
    assert chebyshev_bound(STD, Poly(), 1) == 0
    assert tail_probability(STD, Poly(), 1).value == 0
    assert chebyshev_bound(D14, Poly.var(1) + Poly.var(2), 3) == F(5, 9)
    with pytest.raises(MeasureError):
        chebyshev_bound(STD, Poly.var(1) ** 2, 1)


def test_chebyshev_holds_under_mc():
    rnd = random.Random(17)
    for k in range(10):
        t = Poly.linear({i: F(rnd.randint(-4, 4), rnd.randint(1, 3)) for i in (1, 2, 3)})
        if t.is_zero():
            continue
        for a in (1, 2, 4):
            p = DENSE.marginal(t.support).tail_prob(t, a, samples=20000, seed=100 * k + a)
            assert p.value <= float(chebyshev_bound(DENSE, t, a)) + 4 * p.stderr


@settings(max_examples=40, deadline=None)
@given(st.lists(st.fractions(-3, 3, max_denominator=5), min_size=1, max_size=5), st.integers(1, 4))
def test_atomic_chebyshev_exact(points, a):
    n = len(points)
    mu = ProjectiveFamily([AtomicMarginal((1,), [(x,) for x in points], [F(1, n)] * n)])
    t = Poly.var(1)
    assert F(tail_probability(mu, t, a).value).limit_denominator(1000) <= chebyshev_bound(mu, t, a)
