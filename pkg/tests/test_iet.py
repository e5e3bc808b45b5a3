import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from conftest import GOLDEN, circle_dist
from flatkhinchin import IET, Direction, SurfacePoint, first_return_iet, iet_apply, recurrence_scan
from flatkhinchin.iet import (HitBreakpoint, IETError, Transversal, default_transversal, direct_return, iet_orbit,
                              parse_transversal)
from flatkhinchin.series import SeriesSpec

HARMONIC = SeriesSpec("harmonic")


def tau_of_slope(s):
    return math.atan(s) / (2 * math.pi)


def golden_hits_oracle(x, N):
    """n <= N with ||n alpha|| < 1/n, computed in 40-digit decimal arithmetic."""
    getcontext().prec = 40
    alpha = (Decimal(5).sqrt() - 1) / 2
    out = []
    for n in range(1, N + 1):
        f = (n * alpha) % 1
        d = min(f, 1 - f)
        if d * n < 1:
            out.append(n)
    return out


def test_torus_golden_is_rotation(torus):
    iet = first_return_iet(torus, Direction(tau_of_slope(1 / GOLDEN)))
    assert iet.n_pieces == 2 and iet.circular
    assert iet.breakpoints[0] == pytest.approx(1 - GOLDEN, abs=1e-12)
    assert iet.translations[0] == pytest.approx(GOLDEN, abs=1e-12)
    assert iet.translations[1] == pytest.approx(GOLDEN - 1, abs=1e-12)


def test_torus_rational_slope(torus):
    # slope s returns to y = 0 after moving 1/s horizontally
    iet = first_return_iet(torus, Direction(tau_of_slope(2.0)))
    assert iet_apply(iet, 0.1, 1) == pytest.approx(0.6, abs=1e-12)
    assert iet_apply(iet, 0.1, 2) == pytest.approx(0.1, abs=1e-12)


def test_parallel_direction_rejected(torus):
    with pytest.raises(Exception):
        first_return_iet(torus, Direction(0.0))


def test_lshape_generic(lshape):
    tr = default_transversal(lshape)
    iet = first_return_iet(lshape, Direction(0.1370), tr)
    assert iet.n_pieces - 1 >= 3
    assert iet.tiling_defect() < 1e-12
    rng = np.random.default_rng(3)
    worst = 0.0
    for s in rng.random(1000) * tr.length:
        try:
            got, _ = direct_return(lshape, Direction(0.1370), tr, float(s))
            pred = iet(float(s))
        except IETError:
            continue
        worst = max(worst, circle_dist(got, pred, tr.length) if iet.circular else abs(got - pred))
    assert worst < 1e-9


def test_open_transversal(lshape):
    tr = parse_transversal("0,0.25,0.5,0,1.0")
    iet = first_return_iet(lshape, Direction(0.21), tr)
    assert not iet.circular
    assert iet.tiling_defect() < 1e-12


def test_parse_transversal_errors():
    with pytest.raises(Exception):
        parse_transversal("0,1,2")
    with pytest.raises(Exception):
        Transversal(SurfacePoint.of(0, 0, 0), Direction(0), 0.0)


def test_apply_examples():
    rot = IET.rotation(0.25)
    assert iet_apply(rot, 0.1, 4) == pytest.approx(0.1, abs=1e-15)
    g = IET.rotation(GOLDEN)
    assert iet_apply(g, 0.0, 1) == pytest.approx(GOLDEN, abs=1e-15)
    assert iet_apply(g, 0.37, 0) == 0.37


def test_hit_breakpoint():
    iet = IET(1.0, (0.5,), (0.25, -0.5))
    with pytest.raises(HitBreakpoint):
        iet_orbit(iet, 0.25, 3)


def test_quarter_rotation_hits():
    res = recurrence_scan(IET.rotation(0.25), 0.1, HARMONIC, 100)
    assert set(range(4, 101, 4)) <= set(res["hits"])
    # n = 1 and 3 are also within 1/n (distance 1/4 < 1, 1/4 < 1/3)
    assert set(res["hits"]) == set(range(4, 101, 4)) | {1, 3}


def test_golden_scan_matches_oracle():
    res = recurrence_scan(IET.rotation(GOLDEN), 0.3, HARMONIC, 100_000)
    assert res["hits"] == golden_hits_oracle(0.3, 100_000)
    assert len(res["hits"]) >= 20
    assert 0.4472 <= res["tail_min_ratio"] <= 0.4473
    assert res["min_ratio"] == pytest.approx(1 - GOLDEN, abs=1e-12)  # n = 1


def test_larger_target_more_hits():
    iet = IET.rotation(0.7548776662466927)
    h1 = set(recurrence_scan(iet, 0.2, SeriesSpec("harmonic", c=1), 20000)["hits"])
    h2 = set(recurrence_scan(iet, 0.2, SeriesSpec("harmonic", c=2), 20000)["hits"])
    assert h1 <= h2


def random_iet(lengths, perm):
    L = sum(lengths)
    starts = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    order = [perm.index(k) for k in range(len(perm))]
    img = np.concatenate([[0.0], np.cumsum([lengths[i] for i in order])[:-1]])
    new_start = {i: img[k] for k, i in enumerate(order)}
    trans = [new_start[i] - starts[i] for i in range(len(lengths))]
    return IET(L, tuple(np.cumsum(lengths)[:-1]), tuple(trans))


iet_st = st.integers(2, 6).flatmap(
    lambda n: st.tuples(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n), st.permutations(list(range(n)))))


@given(iet_st, st.floats(0, 1), st.floats(0, 1))
@settings(max_examples=100, deadline=None)
def test_isometry_and_tiling(data, u, v):
    lengths, perm = data
    iet = random_iet(lengths, list(perm))
    assert iet.tiling_defect() < 1e-12
    j = int(np.random.default_rng(0).integers(iet.n_pieces))
    a, b = iet.pieces()[j]
    x, y = a + (b - a) * (0.0005 + 0.999 * u), a + (b - a) * (0.0005 + 0.999 * v)
    assert abs(abs(iet(x) - iet(y)) - abs(x - y)) < 1e-12


@given(iet_st, st.floats(0, 0.999), st.integers(-30, 30))
@settings(max_examples=100, deadline=None)
def test_inverse_roundtrip(data, u, n):
    lengths, perm = data
    iet = random_iet(lengths, list(perm))
    x = u * iet.domain_length
    # orbits through (or within rounding of) a breakpoint are a null set
    cuts = np.array(iet.breakpoints + iet.inverse().breakpoints + (0.0, iet.domain_length))
    try:
        y = iet_apply(iet, x, n)
        orbit = iet_orbit(iet, x, n) if n >= 0 else iet_orbit(iet, y, -n)
        z = iet_apply(iet, y, -n)
    except (HitBreakpoint, ValueError):
        assume(False)
    assume(np.min(np.abs(orbit[:, None] - cuts[None, :])) > 1e-9)
    assert z == pytest.approx(x, abs=1e-9)


@given(st.floats(0.01, 0.49))
@settings(max_examples=15, deadline=None)
def test_torus_directions_give_rotations(torus, tau):
    assume(abs(tau - 0.25) > 0.01)
    iet = first_return_iet(torus, Direction(tau), check_pairs=5)
    alpha = (1 / math.tan(2 * math.pi * tau)) % 1.0
    assert circle_dist(iet(0.0 + 1e-7), (1e-7 + alpha) % 1.0) < 1e-9
