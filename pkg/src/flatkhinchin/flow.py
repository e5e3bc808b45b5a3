"""Straight-line flow, event traces and bounded flat distance."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels as K
from .surface import Direction, SurfacePoint, TranslationSurface, Vec2

__all__ = [
    "FlowError",
    "SingularityHit",
    "StepLimitExceeded",
    "EventKind",
    "TrajectoryEvent",
    "flow_point",
    "flow_many",
    "trace",
    "distance",
    "locate",
    "locate_many",
    "canonical",
    "DEFAULT_MAX_CROSSINGS",
]

DEFAULT_MAX_CROSSINGS = 64


class FlowError(RuntimeError):
    pass


class SingularityHit(FlowError):
    def __init__(self, time: float, singularity: int | None = None):
        super().__init__(f"trajectory hits a singularity at time {time:.17g}")
        self.time = time
        self.singularity = singularity


class StepLimitExceeded(FlowError):
    pass


class EventKind(str, Enum):
    EDGE_CROSSING = "edge_crossing"
    SINGULARITY_HIT = "singularity_hit"
    TIME_REACHED = "time_reached"


@dataclass(frozen=True)
class TrajectoryEvent:
    kind: EventKind
    time: float
    point: SurfacePoint

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "time": self.time,
            "polygon": self.point.polygon,
            "x": float(self.point.pos.x),
            "y": float(self.point.pos.y),
        }


def _bary(surface: TranslationSurface, t: int, x: float, y: float) -> float:
    a = surface.tri_xy[t]
    best = math.inf
    for k in range(3):
        ax, ay = a[k]
        bx, by = a[(k + 1) % 3]
        ex, ey = bx - ax, by - ay
        # normalised signed distance to the edge line (positive inside)
        d = (ex * (y - ay) - ey * (x - ax)) / math.hypot(ex, ey)
        best = min(best, d)
    return best


def locate(surface: TranslationSurface, point: SurfacePoint, direction: tuple[float, float] | None = None) -> tuple[int, float, float]:
    """Triangle containing ``point``; ties on shared boundaries are broken by
    moving a hair along ``direction`` when given."""
    x, y = point.pos.as_float()
    tris = surface.poly_tris[point.polygon]
    scores = [(_bary(surface, int(t), x, y), int(t)) for t in tris]
    if direction is not None:
        h = 1e-9 * max(1.0, surface.shortest_edge)
        px, py = x + direction[0] * h, y + direction[1] * h
        ahead = [(_bary(surface, t, px, py), t) for _, t in scores]
        inside = [(s, t) for (s, t), (s2, _) in zip(scores, ahead) if s > -1e-9 and s2 > -1e-12]
        if inside:
            return max(inside, key=lambda st: (_bary(surface, st[1], px, py), -st[1]))[1], x, y
    s, t = max(scores, key=lambda st: (st[0], -st[1]))
    if s < -1e-9 * max(1.0, surface.diameter_bound):
        raise ValueError(f"point {point} is outside polygon {point.polygon}")
    return t, x, y


def locate_many(surface: TranslationSurface, polygons, xs, ys) -> np.ndarray:
    """Vectorised :func:`locate` without the direction tie-break: for each
    point the triangle of its polygon with the largest inner margin."""
    polygons = np.asarray(polygons, dtype=np.int64)
    xs, ys = np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64)
    a = surface.tri_xy
    b = np.roll(a, -1, axis=1)
    e = b - a
    norm = np.hypot(e[..., 0], e[..., 1])
    # margin[t, k](x, y) = (e_x (y - a_y) - e_y (x - a_x)) / |e|, minimised over k
    margin = np.min((e[None, :, :, 0] * (ys[:, None, None] - a[None, :, :, 1])
                     - e[None, :, :, 1] * (xs[:, None, None] - a[None, :, :, 0])) / norm[None], axis=2)
    margin[surface.tri_poly[None, :] != polygons[:, None]] = -np.inf
    best = np.argmax(margin, axis=1)
    if np.any(margin[np.arange(len(xs)), best] < -1e-9 * max(1.0, surface.diameter_bound)):
        raise ValueError("some points lie outside their polygon")
    return best


def canonical(surface: TranslationSurface, polygon: int, x: float, y: float) -> SurfacePoint:
    """Canonical representative of a point that may sit on a glued edge or vertex."""
    poly = surface.polygons[polygon]
    tol = 1e-12 * max(1.0, surface.diameter_bound)
    n = len(poly)
    for i in range(n):
        vx, vy = poly[i].as_float()
        if math.hypot(x - vx, y - vy) <= tol:
            cls = surface.vertex_class(polygon, i)
            p, j = min((p, j) for p in range(surface.n_polygons) for j in range(len(surface.polygons[p]))
                       if surface.vertex_class(p, j) == cls)
            return SurfacePoint(p, Vec2(*surface.polygons[p][j].as_float()))
    for i in range(n):
        ax, ay = poly[i].as_float()
        bx, by = poly[(i + 1) % n].as_float()
        ex, ey = bx - ax, by - ay
        L2 = ex * ex + ey * ey
        u = ((x - ax) * ex + (y - ay) * ey) / L2
        if 0.0 < u < 1.0 and abs(ex * (y - ay) - ey * (x - ax)) / math.sqrt(L2) <= tol:
            q, j = surface.edge_partner(polygon, i)
            if (q, j) < (polygon, i):
                cx, cy = surface.polygons[q][(j + 1) % len(surface.polygons[q])].as_float()
                dxv, dyv = surface.edge_vector(q, j).as_float()
                # start of edge i corresponds to the end of edge j
                return SurfacePoint(q, Vec2(cx - u * dxv, cy - u * dyv))
            return SurfacePoint(polygon, Vec2(float(x), float(y)))
    return SurfacePoint(polygon, Vec2(float(x), float(y)))


def _max_steps(surface: TranslationSurface, t: float) -> int:
    # triangle crossings; generous multiple of the polygon-edge cap 10*t/shortest_edge
    return int(40.0 * abs(t) / surface.shortest_edge) + 1000


def _direction_vec(direction: Direction | float) -> tuple[float, float]:
    if not isinstance(direction, Direction):
        direction = Direction(direction)
    return direction.unit()


def flow_point(surface: TranslationSurface, x: SurfacePoint, direction: Direction | float, t: float) -> SurfacePoint:
    """``F^t`` in ``direction`` applied to ``x``; negative ``t`` flows backwards."""
    dx, dy = _direction_vec(direction)
    if t < 0:
        dx, dy, t = -dx, -dy, -t
    tri, px, py = locate(surface, x, (dx, dy))
    status, tri, px, py, el, _, corner = K.advance(
        surface.tri_xy, surface.tri_nbr, surface.tri_shift, surface.tri_sing,
        tri, px, py, dx, dy, float(t), surface.eps_sing, _max_steps(surface, t),
    )
    if status == K.SINGULAR:
        raise SingularityHit(el, surface.singularity_of_class(surface.tri_vclass[tri, corner]))
    if status == K.STEP_LIMIT:
        raise StepLimitExceeded(f"step limit exceeded after time {el}")
    return canonical(surface, int(surface.tri_poly[tri]), px, py)


def flow_many(surface: TranslationSurface, tris, xs, ys, taus, ts):
    """Vectorised flow from triangle-located points.

    Returns (tris, xs, ys, status) arrays; status is 0 ok, 1 singular, 2 step limit.
    """
    tris = np.asarray(tris, dtype=np.int64)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    ang = 2 * np.pi * np.asarray(taus, dtype=np.float64)
    ts = np.asarray(ts, dtype=np.float64)
    sign = np.where(ts < 0, -1.0, 1.0)
    dxs = np.ascontiguousarray(np.cos(ang) * sign)
    dys = np.ascontiguousarray(np.sin(ang) * sign)
    dists = np.ascontiguousarray(np.abs(ts))
    n = tris.shape[0]
    out_t = np.empty(n, np.int64)
    out_x = np.empty(n)
    out_y = np.empty(n)
    out_s = np.empty(n, np.int64)
    K.advance_many(
        surface.tri_xy, surface.tri_nbr, surface.tri_shift, surface.tri_sing,
        tris, xs, ys, dxs, dys, dists, surface.eps_sing, _max_steps(surface, float(dists.max(initial=0.0))),
        out_t, out_x, out_y, out_s,
    )
    return out_t, out_x, out_y, out_s


def trace(surface: TranslationSurface, x: SurfacePoint, direction: Direction | float, t_max: float,
          max_crossings: int | None = None) -> list[TrajectoryEvent]:
    """Event log of the flow: polygon-edge crossings then a terminal event.

    Diagonals of the internal triangulation are not reported.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if max_crossings is None:
        max_crossings = int(10 * t_max / surface.shortest_edge) + 1
    dx, dy = _direction_vec(direction)
    tri, px, py = locate(surface, x, (dx, dy))
    status, n, tris, ex, ey, t0, sl, ek, _, _, corner = K.chain(
        surface.tri_xy, surface.tri_nbr, surface.tri_shift, surface.tri_sing,
        tri, px, py, dx, dy, float(t_max), surface.eps_sing, 4 * max_crossings + 64,
    )
    events = []
    crossings = 0
    for j in range(n):
        k = ek[j]
        if k >= 0 and (j < n - 1 or status != K.SINGULAR):
            t = int(tris[j])
            if surface.tri_pedge[t, k] >= 0:
                crossings += 1
                if crossings > max_crossings:
                    raise StepLimitExceeded(f"more than {max_crossings} edge crossings")
                # report the point on the far side of the glued edge
                nt = int(tris[j + 1]) if j + 1 < n else int(surface.tri_nbr[t, k])
                qx = ex[j] + dx * sl[j] + surface.tri_shift[t, k, 0]
                qy = ey[j] + dy * sl[j] + surface.tri_shift[t, k, 1]
                events.append(TrajectoryEvent(EventKind.EDGE_CROSSING, float(t0[j] + sl[j]),
                                              SurfacePoint(int(surface.tri_poly[nt]), Vec2(float(qx), float(qy)))))
    if status == K.STEP_LIMIT:
        raise StepLimitExceeded("triangle step limit exceeded")
    last = n - 1
    t_last = int(tris[last])
    if status == K.SINGULAR:
        cx, cy = surface.tri_xy[t_last, corner]
        events.append(TrajectoryEvent(EventKind.SINGULARITY_HIT, float(t0[last] + sl[last]),
                                      canonical(surface, int(surface.tri_poly[t_last]), cx, cy)))
    else:
        fx = ex[last] + dx * sl[last]
        fy = ey[last] + dy * sl[last]
        events.append(TrajectoryEvent(EventKind.TIME_REACHED, float(t_max),
                                      canonical(surface, int(surface.tri_poly[t_last]), fx, fy)))
    return events


def _float_geometry(surface: TranslationSurface):
    # padded float polygons and per-edge unfolding shifts, cached on the surface
    g = surface.__dict__.get("_float_geometry")
    if g is None:
        P = len(surface.polygons)
        m = max(len(poly) for poly in surface.polygons)
        pv = np.zeros((P, m, 2))
        nv = np.zeros(P, np.int64)
        sq = np.zeros((P, m), np.int64)
        sx = np.zeros((P, m))
        sy = np.zeros((P, m))
        for p, poly in enumerate(surface.polygons):
            nv[p] = len(poly)
            for e, v in enumerate(poly):
                pv[p, e] = v.as_float()
                q, j = surface.edge_partner(p, e)
                sq[p, e] = q
                sx[p, e], sy[p, e] = (surface.polygons[q][(j + 1) % len(surface.polygons[q])] - v).as_float()
        g = surface.__dict__["_float_geometry"] = (pv, nv, sq, sx, sy)
    return g


def _same_point(surface: TranslationSurface, a: SurfacePoint, b: SurfacePoint, tol: float) -> bool:
    if a.polygon == b.polygon:
        return math.hypot(float(a.pos.x) - float(b.pos.x), float(a.pos.y) - float(b.pos.y)) <= tol
    return False


def distance(surface: TranslationSurface, x: SurfacePoint, y: SurfacePoint, r_max: float | None = None,
             max_crossings: int = DEFAULT_MAX_CROSSINGS) -> float:
    """Flat distance from ``x`` to ``y`` along straight developed segments.

    Polygons are unfolded breadth-first around ``x`` (at most ``max_crossings``
    edges deep, staying within ``r_max``); every developed copy of ``y`` gives
    a candidate segment, which is accepted only if flowing along it from ``x``
    actually lands on ``y``. Returns ``math.inf`` when nothing shorter than
    ``r_max`` is found (read it as "distance > r_max").
    """
    if r_max is None:
        r_max = 0.5 * surface.shortest_saddle
    if r_max <= 0:
        raise ValueError("r_max must be positive")
    tol = 1e-9 * max(1.0, surface.diameter_bound)
    x = canonical(surface, x.polygon, *x.pos.as_float())
    y = canonical(surface, y.polygon, *y.pos.as_float())
    if _same_point(surface, x, y, tol):
        return 0.0
    x0, y0 = x.pos.as_float()
    yx, yy = y.pos.as_float()
    max_nodes = 4096
    while True:
        nc, vxs, vys = K.unfold_candidates(*_float_geometry(surface), x.polygon, x0, y0, y.polygon, yx, yy,
                                           float(r_max), max_crossings, max_nodes)
        if nc >= 0:
            break
        max_nodes *= 4
    candidates = [(math.hypot(vxs[k], vys[k]), float(vxs[k]), float(vys[k])) for k in range(nc)]
    candidates.sort()
    for r, vx, vy in candidates:
        if r <= tol:
            return 0.0
        d = Direction.from_vector((vx, vy))
        try:
            z = flow_point(surface, x, d, r)
        except SingularityHit as hit:
            if _through_marked(surface, y, d, r, hit):
                return r
            continue
        except FlowError:
            continue
        if _same_point(surface, z, y, 1e-7 * max(1.0, r)):
            return r
    return math.inf


def _through_marked(surface: TranslationSurface, y: SurfacePoint, d: Direction, r: float, hit: SingularityHit) -> bool:
    # a marked point has angle 2 pi, so the segment continues straight through it:
    # accept when flowing back from y meets the same point at the complementary time
    if hit.singularity is None or not surface.singularities[hit.singularity].marked:
        return False
    try:
        flow_point(surface, y, d, -r)
    except SingularityHit as back:
        return back.singularity == hit.singularity and abs(back.time - (r - hit.time)) <= 1e-9 * max(1.0, r)
    except FlowError:
        return False
    return False
