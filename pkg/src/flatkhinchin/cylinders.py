"""Saddle connections and maximal periodic cylinders up to a length bound.

Saddle connections are found by unfolding triangles inside visibility wedges
rooted at each singular corner. Cylinders are detected from the saddle
connection directions: a point pushed a hair off a saddle connection is
flowed in the same direction and, if it closes up, the cylinder it lies in is
measured by sweeping the closed leaf sideways until it meets a singularity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import _kernels as K
from .flow import canonical
from .surface import Direction, SurfacePoint, TranslationSurface, Vec2

__all__ = [
    "SaddleConnection",
    "Cylinder",
    "ExplosionGuard",
    "MissedMaximality",
    "enumerate_saddle_connections",
    "shortest_saddle",
    "enumerate_cylinders",
    "cylinder_sequence",
    "cylinders_in_direction",
    "cylinder_invariants",
    "separation_check",
    "DEFAULT_MAX_TRIANGLES",
]

DEFAULT_MAX_TRIANGLES = 5_000_000
COLLINEAR_RTOL = 1e-12


class ExplosionGuard(RuntimeError):
    pass


class MissedMaximality(RuntimeError):
    pass


@dataclass(frozen=True)
class SaddleConnection:
    holonomy: Vec2
    start_singularity: int
    end_singularity: int
    start_point: SurfacePoint
    start_corner: tuple[int, int] = field(repr=False, compare=False)

    @property
    def length(self) -> float:
        return self.holonomy.norm()

    @property
    def direction(self) -> Direction:
        return Direction.from_vector(self.holonomy)


@dataclass(frozen=True, eq=False)
class Cylinder:
    """Maximal cylinder. ``direction`` is unoriented (tau in [0, 1/2)).

    ``core_length`` is the circumference T of the closed leaves, ``height``
    the transverse width h, ``area_fraction`` T*h over the surface area.
    """

    direction: Direction
    core_length: float
    height: float
    area_fraction: float
    witness: SurfacePoint
    _unit: tuple[float, float] = field(repr=False)
    _loc: tuple[int, float, float] = field(repr=False)
    _core: tuple = field(repr=False)  # (tris, px, py, seglen) along one period

    @property
    def tau(self) -> float:
        return self.direction.tau

    @property
    def area(self) -> float:
        return self.core_length * self.height

    def to_json(self) -> dict:
        return {
            "tau": self.tau,
            "T": self.core_length,
            "h": self.height,
            "area": self.area_fraction,
            "witness": [self.witness.polygon, float(self.witness.pos.x), float(self.witness.pos.y)],
        }


# -- saddle connections --------------------------------------------------------

def _seg_dist0(ax, ay, bx, by) -> float:
    ex, ey = bx - ax, by - ay
    L2 = ex * ex + ey * ey
    u = 0.0 if L2 == 0 else max(0.0, min(1.0, -(ax * ex + ay * ey) / L2))
    return math.hypot(ax + u * ex, ay + u * ey)


def enumerate_saddle_connections(surface: TranslationSurface, L: float,
                                 max_triangles: int = DEFAULT_MAX_TRIANGLES) -> list[SaddleConnection]:
    """All oriented saddle connections with holonomy length <= L, sorted by
    (length, tau)."""
    if L <= 0:
        raise ValueError("L must be positive")
    if not surface.singularities:
        raise ValueError("surface has no singularities or marked points")
    xy = surface.tri_xy
    nbr, nbr_edge, shift = surface.tri_nbr, surface.tri_nbr_edge, surface.tri_shift
    sing, vclass = surface.tri_sing, surface.tri_vclass
    out = []
    seen = set()
    visits = 0

    def record(t0, k0, cx, cy, cls):
        key = (t0, k0, round(cx, 9), round(cy, 9))
        if key in seen:
            return
        seen.add(key)
        vx, vy = xy[t0, k0]
        start_cls = int(vclass[t0, k0])
        out.append(SaddleConnection(
            Vec2(float(cx), float(cy)),
            surface.singularity_of_class(start_cls),
            surface.singularity_of_class(int(cls)),
            canonical(surface, int(surface.tri_poly[t0]), float(vx), float(vy)),
            (t0, k0),
        ))

    for t0 in range(len(xy)):
        for k0 in range(3):
            if not sing[t0, k0]:
                continue
            ox, oy = -xy[t0, k0, 0], -xy[t0, k0, 1]
            ka, kb = (k0 + 1) % 3, (k0 + 2) % 3
            ax, ay = xy[t0, ka, 0] + ox, xy[t0, ka, 1] + oy
            bx, by = xy[t0, kb, 0] + ox, xy[t0, kb, 1] + oy
            if sing[t0, ka] and math.hypot(ax, ay) <= L:
                record(t0, k0, ax, ay, vclass[t0, ka])
            if _seg_dist0(ax, ay, bx, by) > L:
                continue
            # (tri, edge, offx, offy, Rx, Ry, right_closed, Lx, Ly)
            stack = [(t0, ka, ox, oy, ax, ay, not sing[t0, ka], bx, by)]
            while stack:
                t, e, offx, offy, rx, ry, rc, lx, ly = stack.pop()
                visits += 1
                if visits > max_triangles:
                    raise ExplosionGuard(f"more than {max_triangles} developed triangles")
                t2 = nbr[t, e]
                e2 = nbr_edge[t, e]
                nx, ny = offx - shift[t, e, 0], offy - shift[t, e, 1]
                # in t2 edge e2 runs b -> a; the apex c is opposite
                kc = (e2 + 2) % 3
                cx, cy = xy[t2, kc, 0] + nx, xy[t2, kc, 1] + ny
                pax, pay = xy[t2, (e2 + 1) % 3, 0] + nx, xy[t2, (e2 + 1) % 3, 1] + ny
                pbx, pby = xy[t2, e2, 0] + nx, xy[t2, e2, 1] + ny
                cn = math.hypot(cx, cy)
                cr = rx * cy - ry * cx
                cl = cx * ly - cy * lx
                tol_r = COLLINEAR_RTOL * math.hypot(rx, ry) * cn
                tol_l = COLLINEAR_RTOL * math.hypot(lx, ly) * cn
                c_sing = sing[t2, kc]
                edge_ac = ((e2 + 1) % 3)
                edge_cb = ((e2 + 2) % 3)
                if cr > tol_r and cl > tol_l:
                    if c_sing and cn <= L:
                        record(t0, k0, cx, cy, vclass[t2, kc])
                    if _seg_dist0(pax, pay, cx, cy) <= L:
                        stack.append((t2, edge_ac, nx, ny, rx, ry, rc, cx, cy))
                    if _seg_dist0(cx, cy, pbx, pby) <= L:
                        stack.append((t2, edge_cb, nx, ny, cx, cy, not c_sing, lx, ly))
                elif cr <= tol_r:
                    on_ray = abs(cr) <= tol_r and (rx * cx + ry * cy) > 0
                    new_rc = rc
                    if on_ray and rc:
                        if c_sing and cn <= L:
                            record(t0, k0, cx, cy, vclass[t2, kc])
                        new_rc = not c_sing
                    if _seg_dist0(cx, cy, pbx, pby) <= L:
                        stack.append((t2, edge_cb, nx, ny, rx, ry, new_rc, lx, ly))
                else:
                    if _seg_dist0(pax, pay, cx, cy) <= L:
                        stack.append((t2, edge_ac, nx, ny, rx, ry, rc, lx, ly))
    out.sort(key=lambda sc: (sc.length, sc.direction.tau))
    return out


def shortest_saddle(surface: TranslationSurface) -> float:
    L = surface.shortest_edge * 1.000001
    while True:
        scs = enumerate_saddle_connections(surface, L)
        if scs:
            return min(sc.length for sc in scs)
        L *= 2


# -- cylinders -----------------------------------------------------------------

def _kargs(surface):
    return surface.tri_xy, surface.tri_nbr, surface.tri_shift, surface.tri_sing


def _max_steps(surface, t):
    return int(40.0 * t / surface.shortest_edge) + 1000


def _move(surface, loc, vx, vy):
    """Flow a located point along the vector (vx, vy); None on failure."""
    r = math.hypot(vx, vy)
    if r == 0:
        return loc
    st, t, x, y, _, _, _ = K.advance(*_kargs(surface), loc[0], loc[1], loc[2], vx / r, vy / r, r,
                                     surface.eps_sing, _max_steps(surface, r))
    if st != K.OK:
        return None
    return (t, x, y)


def _core_chain(surface, loc, d, T):
    st, n, tris, px, py, t0, sl, ek, ox, oy, _ = K.chain(*_kargs(surface), loc[0], loc[1], loc[2], d[0], d[1], T,
                                                         surface.eps_sing, _max_steps(surface, T))
    if st != K.OK:
        return None
    return tris[:n].copy(), px[:n].copy(), py[:n].copy(), sl[:n].copy()


def _side_heights(surface, core, d):
    """Distance from the core line to the nearest vertex on each side, and
    whether that vertex is singular."""
    tris, px, py, _ = core
    V = surface.tri_xy[tris]  # (n, 3, 2)
    wx = V[:, :, 0] - px[:, None]
    wy = V[:, :, 1] - py[:, None]
    perp = d[0] * wy - d[1] * wx
    sing = surface.tri_sing[tris]
    tol = 1e-12 * max(1.0, surface.diameter_bound)
    res = []
    for sign in (1.0, -1.0):
        p = sign * perp
        mask = p > tol
        if not mask.any():
            return None
        vals = np.where(mask, p, np.inf)
        h = float(vals.min())
        close = mask & (vals <= h + tol)
        res.append((h, bool(sing[close].any())))
    return res


def _periodic(surface, loc, d, tcap):
    tol = 1e-9 * max(1.0, surface.diameter_bound)
    st, period, _ = K.closed_orbit(*_kargs(surface), loc[0], loc[1], loc[2], d[0], d[1], tcap,
                                   surface.eps_sing, tol, _max_steps(surface, tcap))
    return period if st == K.CLOSED else None


def _measure_cylinder(surface, loc, d, T, max_iter=16):
    """Heights above/below a periodic point; sweeps past regular vertices."""
    n = (-d[1], d[0])
    up = down = 0.0
    for side in (1.0, -1.0):
        cur = loc
        acc = 0.0
        for _ in range(max_iter):
            core = _core_chain(surface, cur, d, T)
            if core is None:
                return None
            hs = _side_heights(surface, core, d)
            if hs is None:
                return None
            h, is_sing = hs[0] if side > 0 else hs[1]
            if is_sing:
                acc += h
                break
            # regular vertex: step just past it and keep sweeping
            step = h + 1e-7 * surface.shortest_edge
            cur = _move(surface, cur, side * n[0] * step, side * n[1] * step)
            if cur is None:
                return None
            acc += step
        else:
            return None
        if side > 0:
            up = acc
        else:
            down = acc
    return up, down


def _on_core(core, d, loc, tol) -> bool:
    tris, px, py, sl = core
    m = tris == loc[0]
    if not m.any():
        return False
    wx = loc[1] - px[m]
    wy = loc[2] - py[m]
    along = wx * d[0] + wy * d[1]
    perp = d[0] * wy - d[1] * wx
    return bool(np.any((np.abs(perp) < tol) & (along > -tol) & (along <= sl[m] + tol)))


def _cylinder_from_point(surface, loc, d, tcap, delta):
    T = _periodic(surface, loc, d, tcap)
    if T is None:
        return None
    hs = _measure_cylinder(surface, loc, d, T)
    if hs is None:
        return None
    up, down = hs
    h = up + down
    n = (-d[1], d[0])
    mid = 0.5 * (up - down)
    wloc = _move(surface, loc, n[0] * mid, n[1] * mid)
    if wloc is None:
        return None
    core = _core_chain(surface, wloc, d, T)
    if core is None:
        return None
    tau_u = Direction.from_vector(d).unoriented()
    area_frac = T * h / float(surface.total_area)
    witness = canonical(surface, int(surface.tri_poly[wloc[0]]), wloc[1], wloc[2])
    return Cylinder(tau_u, T, h, area_frac, witness, (float(d[0]), float(d[1])),
                    (int(wloc[0]), float(wloc[1]), float(wloc[2])), core)


def _offset_start(surface, sc: SaddleConnection, delta):
    """Located point half way along ``sc``, pushed ``delta`` to its left."""
    t0, k0 = sc.start_corner
    xy = surface.tri_xy
    v = xy[t0, k0]
    a = xy[t0, (k0 + 1) % 3] - v
    b = xy[t0, (k0 + 2) % 3] - v
    bis = a / np.linalg.norm(a) + b / np.linalg.norm(b)
    bis /= np.linalg.norm(bis)
    eta = delta
    q = (t0, float(v[0] + eta * bis[0]), float(v[1] + eta * bis[1]))
    hx, hy = sc.holonomy.as_float()
    r = math.hypot(hx, hy)
    d = (hx / r, hy / r)
    n = (-d[1], d[0])
    tx = 0.5 * hx + delta * n[0] - eta * bis[0]
    ty = 0.5 * hy + delta * n[1] - eta * bis[1]
    return _move(surface, q, tx, ty), d


def _dir_key(d) -> float:
    return round(Direction.from_vector(d).unoriented().tau, 10)


def cylinders_in_direction(surface: TranslationSurface, scs, L: float, found=None, delta=None) -> list[Cylinder]:
    """Cylinders of core length < L bounded by the given parallel saddle connections."""
    if delta is None:
        delta = 1e-6 * surface.shortest_edge
    tol = 1e-7 * max(1.0, surface.diameter_bound)
    found = [] if found is None else found
    new = []
    for sc in scs:
        loc, d = _offset_start(surface, sc, delta)
        if loc is None:
            continue
        if any(_in_cylinder(c, loc) for c in found + new if _same_dir(c._unit, d)):
            continue
        cyl = _cylinder_from_point(surface, loc, d, L, delta)
        if cyl is None or not cyl.core_length < L * (1 - 1e-12):
            continue
        # reject coincidences: the orbit at half the offset must have the same period
        half = _move(surface, loc, d[1] * 0.5 * delta, -d[0] * 0.5 * delta)
        if half is None:
            continue
        T2 = _periodic(surface, half, d, L)
        if T2 is None or abs(T2 - cyl.core_length) > 1e-8 * max(1.0, cyl.core_length):
            continue
        if any(_same_cylinder(cyl, c, tol) for c in found + new):
            continue
        new.append(cyl)
    return new


def _in_cylinder(c: Cylinder, loc) -> bool:
    """Sufficient test: ``loc`` sits within h/2 of a core segment in its own triangle."""
    tris, px, py, sl = c._core
    m = tris == loc[0]
    if not m.any():
        return False
    d = c._unit
    wx = loc[1] - px[m]
    wy = loc[2] - py[m]
    along = wx * d[0] + wy * d[1]
    perp = d[0] * wy - d[1] * wx
    return bool(np.any((np.abs(perp) < 0.5 * c.height * (1 - 1e-9)) & (along >= 0) & (along <= sl[m])))


def _same_dir(u, v) -> bool:
    return abs(u[0] * v[1] - u[1] * v[0]) < 1e-10


def _same_cylinder(a: Cylinder, b: Cylinder, tol: float) -> bool:
    if not _same_dir(a._unit, b._unit):
        return False
    if abs(a.core_length - b.core_length) > 1e-8 * max(1.0, a.core_length):
        return False
    return _on_core(a._core, a._unit, b._loc, tol)


def enumerate_cylinders(surface: TranslationSurface, L: float, min_area: float,
                        max_triangles: int = DEFAULT_MAX_TRIANGLES) -> list[Cylinder]:
    """Maximal cylinders with core length < L and area fraction >= min_area."""
    if not (0 < min_area <= 1):
        raise ValueError("min_area must be in (0, 1]")
    if L <= 0:
        raise ValueError("L must be positive")
    scs = [sc for sc in enumerate_saddle_connections(surface, L, max_triangles) if sc.length < L]
    groups: dict[float, list[SaddleConnection]] = {}
    for sc in scs:
        groups.setdefault(_dir_key(sc.holonomy.as_float()), []).append(sc)
    out = []
    for key in sorted(groups):
        for c in cylinders_in_direction(surface, groups[key], L):
            if c.area_fraction >= min_area * (1 - 1e-12):
                out.append(c)
    out.sort(key=lambda c: (c.core_length, c.tau))
    return out


def cylinder_sequence(surface: TranslationSurface, L: float, min_area: float | None = None) -> list[Cylinder]:
    """Cylinders of area fraction at least sigma ordered by (length, tau)."""
    if min_area is None:
        min_area = float(surface.sigma)
    return enumerate_cylinders(surface, L, min_area)


# -- invariants ----------------------------------------------------------------

def cylinder_invariants(surface: TranslationSurface, cyl: Cylinder, tol: float = 1e-9) -> dict[str, bool]:
    """Closure, area bookkeeping and maximality of one cylinder."""
    d = cyl._unit
    n = (-d[1], d[0])
    res = {}
    end = _move(surface, cyl._loc, d[0] * cyl.core_length, d[1] * cyl.core_length)
    res["closes"] = (end is not None and surface.tri_poly[end[0]] == surface.tri_poly[cyl._loc[0]]
                     and math.hypot(end[1] - cyl._loc[1], end[2] - cyl._loc[2]) < tol)
    res["area"] = abs(cyl.area_fraction - cyl.core_length * cyl.height / float(surface.total_area)) < 1e-12 and 0 < cyl.area_fraction <= 1 + 1e-12
    inner_ok = True
    bound_ok = True
    for side in (1.0, -1.0):
        off = side * 0.5 * cyl.height * (1 - 1e-6)
        p = _move(surface, cyl._loc, n[0] * off, n[1] * off)
        if p is None or _periodic(surface, p, d, 2 * cyl.core_length) is None:
            inner_ok = False
            continue
        core = _core_chain(surface, p, d, cyl.core_length)
        hs = _side_heights(surface, core, d) if core is not None else None
        if hs is None:
            bound_ok = False
            continue
        h, is_sing = hs[0] if side > 0 else hs[1]
        # the boundary leaf passes through a singular point
        bound_ok &= is_sing and h < 1e-5 * cyl.height + 1e-9
    res["interior_periodic"] = inner_ok
    res["maximal"] = bound_ok
    return res


@njit(cache=True)
def _crossing_pairs(seg_cyl, seg_tri, px, py, sl, ux, uy, ncyl):
    hit = np.zeros((ncyl, ncyl), np.bool_)
    order = np.argsort(seg_tri, kind="mergesort")
    n = order.shape[0]
    i0 = 0
    while i0 < n:
        tcur = seg_tri[order[i0]]
        i1 = i0
        while i1 < n and seg_tri[order[i1]] == tcur:
            i1 += 1
        for a in range(i0, i1):
            ia = order[a]
            ca = seg_cyl[ia]
            for b in range(a + 1, i1):
                ib = order[b]
                cb = seg_cyl[ib]
                if ca == cb or hit[ca, cb]:
                    continue
                den = ux[ca] * uy[cb] - uy[ca] * ux[cb]
                if abs(den) < 1e-12:
                    continue
                wx = px[ib] - px[ia]
                wy = py[ib] - py[ia]
                s = (wx * uy[cb] - wy * ux[cb]) / den
                u = (wx * uy[ca] - wy * ux[ca]) / den
                if 0.0 < s < sl[ia] and 0.0 < u < sl[ib]:
                    hit[ca, cb] = True
                    hit[cb, ca] = True
        i0 = i1
    return hit


def separation_check(cylinders: list[Cylinder], rtol: float = 1e-9) -> dict:
    """Check R >= h1*|csc(angle)| for every pair of cylinders whose interiors meet.

    Interiors of two non-parallel cylinders meet exactly when their core
    curves cross. Returns violations of that bound plus, as a report only,
    how often the looser ``|tau1 - tau2| >= 1/(R*T1)`` also holds.
    """
    nc = len(cylinders)
    if nc < 2:
        return {"pairs": 0, "violations": [], "unit_form_failures": 0}
    seg_cyl, tris, pxs, pys, sls = [], [], [], [], []
    for i, c in enumerate(cylinders):
        t, px, py, sl = c._core
        seg_cyl.append(np.full(len(t), i, np.int64))
        tris.append(t)
        pxs.append(px)
        pys.append(py)
        sls.append(sl)
    ux = np.array([c._unit[0] for c in cylinders])
    uy = np.array([c._unit[1] for c in cylinders])
    hit = _crossing_pairs(np.concatenate(seg_cyl), np.concatenate(tris), np.concatenate(pxs),
                          np.concatenate(pys), np.concatenate(sls), ux, uy, nc)
    ii, jj = np.nonzero(np.triu(hit, 1))
    violations = []
    unit_fail = 0
    for i, j in zip(ii.tolist(), jj.tolist()):
        a, b = cylinders[i], cylinders[j]
        sin_d = abs(a._unit[0] * b._unit[1] - a._unit[1] * b._unit[0])
        dtau = abs(a.tau - b.tau)
        dtau = min(dtau, 0.5 - dtau)
        for c1, c2 in ((a, b), (b, a)):
            need = c1.height / sin_d
            if c2.core_length < need * (1 - rtol):
                violations.append({"tau1": c1.tau, "T1": c1.core_length, "h1": c1.height,
                                   "tau2": c2.tau, "R": c2.core_length, "bound": need})
            if dtau < 1.0 / (c2.core_length * c1.core_length):
                unit_fail += 1
    return {"pairs": int(len(ii)), "violations": violations, "unit_form_failures": unit_fail}
