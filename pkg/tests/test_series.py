import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flatkhinchin.series import (BATTERY, SeriesSpec, VerdictThresholds, battery, divergence_verdict, partial_sums,
                                 sandwich_table, sum_floor_sqrt)


def test_parse_roundtrip():
    for text in ["harmonic:2", "power:1,1.5", "log:1,2", "powerlog:1,2,1", "const:3", "list:1,0.5,0.25"]:
        assert str(SeriesSpec.parse(text)) == text
    with pytest.raises(ValueError):
        SeriesSpec.parse("power:1")
    with pytest.raises(ValueError):
        SeriesSpec.parse("geometric:2")
    with pytest.raises(ValueError):
        SeriesSpec.parse("list:1,-1")


def test_zeta_two():
    r = partial_sums(SeriesSpec("power", p=3.0), 10 ** 6)
    assert abs(r["sum_i_ai"] - math.pi ** 2 / 6) < 1e-5


def test_harmonic_partial_sum():
    r = partial_sums(SeriesSpec("power", p=2.0), 10 ** 6)
    assert abs(r["sum_i_ai"] - (math.log(10 ** 6) + 0.5772156649015329)) < 1e-3


def test_floor_sqrt_against_loop():
    spec = SeriesSpec("power", p=1.5)
    a = spec.terms(100)
    for J in (1, 2, 3, 4, 15, 16, 17, 99, 1000):
        want = math.fsum(a[math.isqrt(j) - 1] for j in range(1, J + 1))
        assert sum_floor_sqrt(a, J) == pytest.approx(want, rel=1e-13)


def test_verdicts():
    assert divergence_verdict(SeriesSpec("harmonic"))["verdicts"]["sum_a"] == "diverges_empirically"
    assert divergence_verdict(SeriesSpec("power", p=3.0))["verdicts"]["sum_a"] == "converges_empirically"
    v = divergence_verdict(SeriesSpec.parse("log:1,2"))
    assert v["label"] == "empirical"
    assert v["verdicts"]["sum_a"] == "converges_empirically"
    assert v["verdicts"]["sum_i_ai"] == "diverges_empirically"


def test_battery_sides_agree():
    for row in battery():
        want = "diverges_empirically" if row["expected_i_ai"] == "diverges" else "converges_empirically"
        assert row["sandwich_holds"], row
        assert row["verdicts"]["sum_i_ai"] == want, row
        assert row["verdicts"]["sum_a_floor_sqrt"] == want, row
    assert sum(d for _, d in BATTERY.values()) == 4 and len(BATTERY) == 8


def test_needs_two_decades():
    with pytest.raises(ValueError):
        divergence_verdict(SeriesSpec("harmonic"), VerdictThresholds(decades=(1000,)))


@given(st.floats(0.1, 10), st.floats(0.0, 4.0), st.integers(4, 5000))
@settings(max_examples=40, deadline=None)
def test_sandwich_every_truncation(c, p, K):
    spec = SeriesSpec("power", c=c, p=p)
    assert spec.validate(1000)
    assert all(r["holds"] for r in sandwich_table(spec, K))


@given(st.lists(st.floats(1e-6, 1.0), min_size=64, max_size=300))
@settings(max_examples=40, deadline=None)
def test_sandwich_explicit_lists(vals):
    spec = SeriesSpec("list", values=tuple(sorted(vals, reverse=True)))
    K = 2 ** (len(vals).bit_length() - 1) - 1
    if K >= 4:
        assert all(r["holds"] for r in sandwich_table(spec, K))


@given(st.sampled_from(["harmonic:1", "power:1,2", "log:1,1", "powerlog:2,2,1"]))
@settings(max_examples=4, deadline=None)
def test_generators_nonincreasing(text):
    spec = SeriesSpec.parse(text)
    assert spec.validate(10 ** 5)
    t = np.linspace(1, 1000, 5000)
    assert np.all(np.diff(spec(t)) <= 0)
