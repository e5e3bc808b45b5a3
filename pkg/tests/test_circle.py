from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from flatkhinchin import Arc, covers_circle, minimal_covering_constant, union_measure, vorobets_constant
from flatkhinchin.circle import (ArcUnion, NoCylinders, annulus_count, cylinder_arcs, key_bound_report,
                                 sum_bound_check)
from flatkhinchin.cylinders import cylinder_sequence


def brute_measure(arcs, J=(0.0, 1.0), n=200_000):
    # midpoint grid count
    a, b = J
    hits = 0
    for k in range(n):
        x = a + (b - a) * (k + 0.5) / n
        if any(min(abs(x - c.center) % 1, 1 - abs(x - c.center) % 1) < c.radius for c in arcs):
            hits += 1
    return (b - a) * hits / n


def test_examples():
    assert union_measure([Arc("3/20", "1/20"), Arc("9/40", "3/40")]) == Fraction(1, 5)
    assert union_measure([Arc(0.0, "1/10")]) == Fraction(1, 5)
    assert union_measure([]) == 0
    assert union_measure([Arc(0.3, 0.7)]) == 1


def test_covering_examples():
    assert covers_circle([Arc(0, "3/10"), Arc("1/2", "3/10")]) == (True, None)
    ok, gap = covers_circle([Arc(0, "1/5"), Arc("1/2", "1/5")])
    assert not ok
    # two tied gaps, (0.2, 0.3) and (0.7, 0.8); the first is reported
    assert gap == (Fraction(1, 4), Fraction(1, 10))
    assert covers_circle([Arc(0.2, 0.5)])[0]


def test_interval_restriction():
    arcs = [Arc(0.0, "1/10")]
    assert union_measure(arcs, (Fraction(0), Fraction(1, 2))) == Fraction(1, 10)
    assert union_measure(arcs, (Fraction(1, 4), Fraction(1, 4))) == 0
    with pytest.raises(ValueError):
        union_measure(arcs, (0.5, 0.2))


def test_bad_radius():
    with pytest.raises(ValueError):
        Arc(0.1, 0)


arc_st = st.builds(Arc, st.fractions(0, 1, max_denominator=64), st.fractions(Fraction(1, 200), Fraction(1, 3), max_denominator=200))
arcs_st = st.lists(arc_st, max_size=8)


@given(arcs_st, arcs_st)
@settings(max_examples=100, deadline=None)
def test_monotone_and_subadditive(A, B):
    mA, mB, mAB = union_measure(A), union_measure(B), union_measure(A + B)
    assert mAB >= max(mA, mB)
    assert mAB <= mA + mB
    assert 0 <= mAB <= 1


@given(arcs_st)
@settings(max_examples=100, deadline=None)
def test_covers_iff_full_measure(A):
    ok, gap = covers_circle(A)
    assert ok == (union_measure(A) == 1)
    if not ok:
        assert gap[1] > 0
        assert all(g[1] <= gap[1] for g in ArcUnion.of(A).gaps())


@given(st.lists(arc_st, min_size=1, max_size=4))
@settings(max_examples=10, deadline=None)
def test_against_grid(A):
    assert float(union_measure(A)) == pytest.approx(brute_measure(A, n=20_000), abs=2e-4 * len(A) + 1e-4)


def test_float_and_exact_agree():
    A = [Arc(0.123, 0.05), Arc(0.9, 0.2), Arc(0.5, 0.01)]
    assert float(union_measure(A)) == pytest.approx(union_measure(A, exact=False), abs=1e-15)


def test_covering_constant_torus(torus):
    vals = [minimal_covering_constant(torus, L) for L in (10, 20, 40)]
    assert all(0 < v <= 4 for v in vals)
    assert max(vals) <= 2 * min(vals)
    assert all(vorobets_constant(torus).exceeds(v) for v in vals)


def test_covering_constant_is_minimal(torus):
    L = 10
    cyls = cylinder_sequence(torus, L)
    c = minimal_covering_constant(torus, L, cylinders=cyls)
    arcs = lambda k: cylinder_arcs(cyls, lambda cy: k / (cy.core_length * L))
    assert covers_circle(arcs(c), exact=False)[0]
    assert not covers_circle(arcs(c - 2e-6), exact=False)[0]


def test_covering_needs_cylinders(torus):
    with pytest.raises(NoCylinders):
        minimal_covering_constant(torus, 0.5)


@pytest.mark.parametrize("name", ["torus", "lshape"])
def test_sum_bound_dyadic(request, name):
    s = request.getfixturevalue(name)
    for L in (5, 10):
        cyls = cylinder_sequence(s, L)
        for k in range(4):
            for i in range(2 ** k):
                res = sum_bound_check(s, L, (Fraction(i, 2 ** k), Fraction(i + 1, 2 ** k)), cylinders=cyls)
                assert res["pass"], res


@pytest.fixture(scope="module")
def torus100(torus):
    return cylinder_sequence(torus, 100)


def test_key_bound(torus, torus100):
    r = key_bound_report(torus, 50, (0, 1), 2.0, cylinders=torus100)
    assert r["measured"] > 0 and r["correction"] == pytest.approx(2 / 100 ** 2)
    assert key_bound_report(torus, 50, (Fraction(1, 3), Fraction(1, 3)), 2.0, cylinders=torus100)["measured"] == 0
    # N below the first cylinder, C1*N above it: only the annulus counts
    r = key_bound_report(torus, 0.9, (0, 1), 1.2)
    assert r["annulus_count"] == 2 and r["measured"] > 0


def test_annulus_growth_is_quadratic(torus100):
    cyls = torus100
    J = (0.0, 0.25)
    ratios = [annulus_count(cyls, L, 2, J) / (0.25 * L * L) for L in (12.5, 25, 50)]
    assert max(ratios) <= 2 * min(ratios)
