import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from conftest import circle_dist, torus_flow
from flatkhinchin import Direction, SurfacePoint, distance, flow_point, trace
from flatkhinchin.flow import EventKind, FlowError, SingularityHit, StepLimitExceeded, canonical, flow_many, locate, locate_many


def xy(p):
    return float(p.pos.x), float(p.pos.y)


def torus_close(a, b, tol=1e-9):
    return circle_dist(a[0], b[0]) < tol and circle_dist(a[1], b[1]) < tol


def test_horizontal_examples(torus):
    x = SurfacePoint.of(0, 0.25, 0.5)
    assert torus_close(xy(flow_point(torus, x, Direction(0), 0.5)), (0.75, 0.5))
    assert torus_close(xy(flow_point(torus, x, Direction(0), 1.0)), (0.25, 0.5))


def test_irrational_slope_matches_closed_form(torus):
    tau = math.atan(math.sqrt(2) - 1) / (2 * math.pi)
    for x0, y0 in [(0.1, 0.2), (0.77, 0.31), (0.5, 0.9)]:
        got = xy(flow_point(torus, SurfacePoint.of(0, x0, y0), Direction(tau), 100.0))
        assert torus_close(got, torus_flow(x0, y0, tau, 100.0))


def test_diagonal_hits_marked_corner(torus):
    ev = trace(torus, SurfacePoint.of(0, 0, 0), Direction(1 / 8), 5.0)
    assert ev[-1].kind == EventKind.SINGULARITY_HIT
    assert ev[-1].time == pytest.approx(math.sqrt(2))
    with pytest.raises(SingularityHit) as err:
        flow_point(torus, SurfacePoint.of(0, 0.5, 0.5), Direction(1 / 8), 5.0)
    assert err.value.time == pytest.approx(math.sqrt(2) / 2)


def test_trace_horizontal(torus):
    ev = trace(torus, SurfacePoint.of(0, 0.5, 0.5), Direction(0), 2.5)
    assert [e.kind for e in ev] == [EventKind.EDGE_CROSSING] * 2 + [EventKind.TIME_REACHED]
    assert torus_close(xy(ev[-1].point), (0.0, 0.5))
    assert [e.time for e in ev] == sorted(e.time for e in ev)


def test_trace_lshape_bottom_arm(lshape):
    # the bottom arm is a horizontal cylinder of circumference 2
    ev = trace(lshape, SurfacePoint.of(0, 0.5, 0.5), Direction(0), 10.0)
    crossings = [e for e in ev if e.kind == EventKind.EDGE_CROSSING]
    assert len(crossings) == 5
    assert ev[-1].kind == EventKind.TIME_REACHED


def test_trace_step_cap(torus):
    with pytest.raises(StepLimitExceeded):
        trace(torus, SurfacePoint.of(0, 0.1, 0.2), Direction(0.01), 100.0, max_crossings=3)


def test_trace_rejects_nonpositive(torus):
    with pytest.raises(ValueError):
        trace(torus, SurfacePoint.of(0, 0.1, 0.2), Direction(0.0), 0.0)


def test_distance_examples(torus):
    P = lambda a, b: SurfacePoint.of(0, a, b)
    assert distance(torus, P(0.1, 0.5), P(0.9, 0.5), r_max=0.5) == pytest.approx(0.2, abs=1e-12)
    assert distance(torus, P(0.1, 0.1), P(0.9, 0.9), r_max=0.5) == pytest.approx(math.hypot(0.2, 0.2), abs=1e-12)
    assert distance(torus, P(0.3, 0.3), P(0.3, 0.3)) == 0.0
    assert distance(torus, P(0.1, 0.5), P(0.6, 0.5), r_max=0.1) == math.inf


def brute_torus_distance(a, b):
    # minimum over the 9 nearest lattice translates
    return min(math.hypot(b[0] + i - a[0], b[1] + j - a[1]) for i in (-1, 0, 1) for j in (-1, 0, 1))


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
@settings(max_examples=60, deadline=None)
def test_torus_distance_brute_force(torus, a, b, c, d):
    got = distance(torus, SurfacePoint.of(0, a, b), SurfacePoint.of(0, c, d), r_max=0.49)
    want = brute_torus_distance((a, b), (c, d))
    if want < 0.49 - 1e-9:
        assert got == pytest.approx(want, abs=1e-9)


coords = st.floats(0.02, 0.98)


def lpoint(u, v):
    # a point of the L(2,2) polygon from the unit square parameters
    return SurfacePoint.of(0, 2 * u, v) if v < 0.5 else SurfacePoint.of(0, u, 1 + (v - 0.5) * 2)


@given(coords, coords, coords, coords, coords, coords)
@settings(max_examples=40, deadline=None)
def test_distance_symmetric_and_triangle(lshape, a, b, c, d, e, f):
    x, y, z = lpoint(a, b), lpoint(c, d), lpoint(e, f)
    r = 0.45
    dxy = distance(lshape, x, y, r_max=r)
    dyx = distance(lshape, y, x, r_max=r)
    if math.isfinite(dxy) or math.isfinite(dyx):
        assert dxy == pytest.approx(dyx, abs=1e-9)
    dyz = distance(lshape, y, z, r_max=r)
    dxz = distance(lshape, x, z, r_max=2 * r)
    if math.isfinite(dxy) and math.isfinite(dyz):
        assert dxz <= dxy + dyz + 1e-9


@given(coords, coords, st.floats(0.0, 1.0), st.floats(0.1, 1e4))
@settings(max_examples=60, deadline=None)
def test_reversibility(lshape, u, v, tau, t):
    x = lpoint(u, v)
    try:
        y = flow_point(lshape, x, Direction(tau), t)
        z = flow_point(lshape, y, Direction(tau), -t)
    except FlowError:
        assume(False)
    assert z.polygon == x.polygon
    assert math.hypot(float(z.pos.x) - float(x.pos.x), float(z.pos.y) - float(x.pos.y)) < 1e-9 * max(1, t / 100)


@given(coords, coords, st.floats(0.0, 1.0), st.floats(0.1, 500), st.floats(0.1, 500))
@settings(max_examples=60, deadline=None)
def test_additivity(lshape, u, v, tau, t1, t2):
    x = lpoint(u, v)
    try:
        a = flow_point(lshape, x, Direction(tau), t1 + t2)
        b = flow_point(lshape, flow_point(lshape, x, Direction(tau), t1), Direction(tau), t2)
    except FlowError:
        assume(False)
    assert distance(lshape, a, b, r_max=1e-6) < 1e-9


@given(coords, coords, st.floats(0.0, 1.0), st.floats(-0.02, 0.02), st.floats(0.05, 0.3))
@settings(max_examples=40, deadline=None)
def test_transversality_identity(torus, a, b, tau, dtau, t):
    # the two endpoints are t*|sin(2 pi dtau)| apart when the triangle they span avoids the marked point
    assume(abs(dtau) > 1e-4)
    x = SurfacePoint.of(0, a, b)
    tp = tau + dtau
    delta = 2 * math.pi * dtau
    p = flow_point(torus, x, Direction(tau), t * math.cos(delta))
    q = flow_point(torus, x, Direction(tp), t)
    want = abs(math.sin(delta)) * t
    assert distance(torus, p, q, r_max=0.4) == pytest.approx(want, abs=1e-9)


def test_flow_many_matches_closed_form(torus):
    rng = np.random.default_rng(7)
    n = 2000
    xs, ys, taus, ts = rng.random(n), rng.random(n), rng.random(n), rng.random(n) * 1000
    tris = np.array([locate(torus, SurfacePoint.of(0, x, y))[0] for x, y in zip(xs, ys)])
    assert np.array_equal(tris, locate_many(torus, np.zeros(n, np.int64), xs, ys))
    ot, ox, oy, st_ = flow_many(torus, tris, xs, ys, taus, ts)
    ok = st_ == 0
    assert ok.mean() > 0.99
    want = np.array([torus_flow(*args) for args in zip(xs, ys, taus, ts)])
    dx = np.abs((ox - want[:, 0] + 0.5) % 1.0 - 0.5)
    dy = np.abs((oy - want[:, 1] + 0.5) % 1.0 - 0.5)
    assert max(dx[ok].max(), dy[ok].max()) < 1e-9


def test_canonical_maps_glued_edge_to_partner(lshape):
    # (0, 0.5) on the left edge is glued to (2, 0.5) on the right edge of the bottom arm
    p = canonical(lshape, 0, 0.0, 0.5)
    q = canonical(lshape, 0, 2.0, 0.5)
    assert (float(p.pos.x), float(p.pos.y)) == (float(q.pos.x), float(q.pos.y))
