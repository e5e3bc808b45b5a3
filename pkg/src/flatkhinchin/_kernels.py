"""Numba kernels for straight-line flow on a triangulated translation surface.

Triangles are given in their polygon's coordinates. Crossing local edge ``k``
of triangle ``t`` moves to ``nbr[t, k]`` and adds ``shift[t, k]`` to the
position (zero for diagonals inside a polygon).

Status codes returned by the kernels:
    0  time reached
    1  singularity hit
    2  step limit exceeded
    3  closed up (closed_orbit only)
"""
import numpy as np
from numba import njit

OK = 0
SINGULAR = 1
STEP_LIMIT = 2
CLOSED = 3


@njit(cache=True, nogil=True)
def exit_edge(xy, t, px, py, dx, dy):
    best_k = -1
    best_s = np.inf
    for k in range(3):
        ax = xy[t, k, 0]
        ay = xy[t, k, 1]
        ex = xy[t, (k + 1) % 3, 0] - ax
        ey = xy[t, (k + 1) % 3, 1] - ay
        den = dx * ey - dy * ex
        if den > 0.0:
            s = ((ax - px) * ey - (ay - py) * ex) / den
            if s < best_s:
                best_s = s
                best_k = k
    if best_s < 0.0:
        best_s = 0.0
    return best_k, best_s


@njit(cache=True, nogil=True)
def _near_vertex(xy, sing, t, k, qx, qy, eps):
    """Index of the singular endpoint of edge k within eps of (qx, qy), else -1."""
    for c in (k, (k + 1) % 3):
        if sing[t, c]:
            ddx = qx - xy[t, c, 0]
            ddy = qy - xy[t, c, 1]
            if ddx * ddx + ddy * ddy < eps * eps:
                return c
    return -1


@njit(cache=True, nogil=True)
def advance(xy, nbr, shift, sing, t, px, py, dx, dy, dist, eps, max_steps):
    """Flow for path length ``dist``.

    Returns (status, tri, x, y, elapsed, steps, hit_corner).
    """
    remaining = dist
    elapsed = 0.0
    steps = 0
    while True:
        k, s = exit_edge(xy, t, px, py, dx, dy)
        if k < 0:
            return STEP_LIMIT, t, px, py, elapsed, steps, -1
        if s >= remaining:
            px += dx * remaining
            py += dy * remaining
            return OK, t, px, py, dist, steps, -1
        qx = px + dx * s
        qy = py + dy * s
        c = _near_vertex(xy, sing, t, k, qx, qy, eps)
        if c >= 0:
            return SINGULAR, t, xy[t, c, 0], xy[t, c, 1], elapsed + s, steps, c
        elapsed += s
        remaining = dist - elapsed
        px = qx + shift[t, k, 0]
        py = qy + shift[t, k, 1]
        t = nbr[t, k]
        steps += 1
        if steps > max_steps:
            return STEP_LIMIT, t, px, py, elapsed, steps, -1


@njit(cache=True, nogil=True)
def advance_many(xy, nbr, shift, sing, tris, xs, ys, dxs, dys, dists, eps, max_steps, out_t, out_x, out_y, out_status):
    for i in range(tris.shape[0]):
        st, t, x, y, _, _, _ = advance(xy, nbr, shift, sing, tris[i], xs[i], ys[i], dxs[i], dys[i], dists[i], eps, max_steps)
        out_t[i] = t
        out_x[i] = x
        out_y[i] = y
        out_status[i] = st


@njit(cache=True, nogil=True)
def chain(xy, nbr, shift, sing, t, px, py, dx, dy, dist, eps, max_steps):
    """Flow for ``dist`` recording every triangle visited.

    Per step j: triangle, entry point (triangle coordinates), entry time,
    length of the segment inside the triangle, edge crossed on exit (-1 at the
    end) and the developed offset (developed = local + offset).
    Returns (status, n, tris, px, py, t0, seglen, exit_k, ox, oy, hit_corner).
    """
    cap = max_steps + 1
    tris = np.empty(cap, np.int64)
    ex = np.empty(cap)
    ey = np.empty(cap)
    t0 = np.empty(cap)
    sl = np.empty(cap)
    ek = np.empty(cap, np.int64)
    ox = np.empty(cap)
    oy = np.empty(cap)
    offx = 0.0
    offy = 0.0
    elapsed = 0.0
    n = 0
    while True:
        tris[n] = t
        ex[n] = px
        ey[n] = py
        t0[n] = elapsed
        ox[n] = offx
        oy[n] = offy
        k, s = exit_edge(xy, t, px, py, dx, dy)
        remaining = dist - elapsed
        if k < 0:
            sl[n] = 0.0
            ek[n] = -1
            return STEP_LIMIT, n + 1, tris, ex, ey, t0, sl, ek, ox, oy, -1
        if s >= remaining:
            sl[n] = remaining
            ek[n] = -1
            return OK, n + 1, tris, ex, ey, t0, sl, ek, ox, oy, -1
        qx = px + dx * s
        qy = py + dy * s
        sl[n] = s
        ek[n] = k
        c = _near_vertex(xy, sing, t, k, qx, qy, eps)
        if c >= 0:
            return SINGULAR, n + 1, tris, ex, ey, t0, sl, ek, ox, oy, c
        elapsed += s
        offx -= shift[t, k, 0]
        offy -= shift[t, k, 1]
        px = qx + shift[t, k, 0]
        py = qy + shift[t, k, 1]
        t = nbr[t, k]
        n += 1
        if n >= cap:
            return STEP_LIMIT, n, tris, ex, ey, t0, sl, ek, ox, oy, -1


@njit(cache=True, nogil=True)
def closed_orbit(xy, nbr, shift, sing, t, px, py, dx, dy, tcap, eps, tol, max_steps):
    """Flow from (t, px, py) until the orbit passes through its start again.

    Returns (status, period, n_steps). status is CLOSED on success.
    """
    t_start = t
    x0 = px
    y0 = py
    elapsed = 0.0
    steps = 0
    first = True
    while True:
        k, s = exit_edge(xy, t, px, py, dx, dy)
        if k < 0:
            return STEP_LIMIT, 0.0, steps
        if t == t_start and not first:
            wx = x0 - px
            wy = y0 - py
            along = wx * dx + wy * dy
            perp = dx * wy - dy * wx
            if abs(perp) < tol and along > -tol and along <= s + tol:
                return CLOSED, elapsed + along, steps
        first = False
        if elapsed + s > tcap:
            return OK, 0.0, steps
        qx = px + dx * s
        qy = py + dy * s
        c = _near_vertex(xy, sing, t, k, qx, qy, eps)
        if c >= 0:
            return SINGULAR, elapsed + s, steps
        elapsed += s
        px = qx + shift[t, k, 0]
        py = qy + shift[t, k, 1]
        t = nbr[t, k]
        steps += 1
        if steps > max_steps:
            return STEP_LIMIT, 0.0, steps


@njit(cache=True, nogil=True)
def first_hit(xy, nbr, shift, sing, tri_poly, t, px, py, dx, dy, tcap, eps, max_steps,
              pc_poly, pc_ax, pc_ay, pc_ex, pc_ey, pc_len, pc_s0, min_along):
    """Flow until the path crosses one of the transversal pieces.

    A piece is the segment ``a + v*e`` (unit e, 0 <= v <= len) in polygon
    coordinates; ``pc_s0`` is the transversal parameter at ``a``. Crossings at
    path length <= ``min_along`` are ignored so a start point on the
    transversal does not count as its own return.
    Returns (status, s_hit, time, tri, x, y). status 0 = hit, 1 = singular,
    2 = cap/step limit.
    """
    elapsed = 0.0
    steps = 0
    npc = pc_poly.shape[0]
    while True:
        k, s = exit_edge(xy, t, px, py, dx, dy)
        if k < 0:
            return 2, 0.0, elapsed, t, px, py
        p = tri_poly[t]
        best = np.inf
        best_s = 0.0
        for j in range(npc):
            if pc_poly[j] != p:
                continue
            den = dx * pc_ey[j] - dy * pc_ex[j]
            if den == 0.0:
                continue
            wx = pc_ax[j] - px
            wy = pc_ay[j] - py
            u = (wx * pc_ey[j] - wy * pc_ex[j]) / den
            v = (wx * dy - wy * dx) / den
            scale = pc_len[j] * 1e-12 + 1e-15
            if v < -scale or v > pc_len[j] + scale:
                continue
            if u < -1e-13 or u > s + 1e-13:
                continue
            if elapsed + u <= min_along:
                continue
            if u < best:
                best = u
                vv = v
                if vv < 0.0:
                    vv = 0.0
                if vv > pc_len[j]:
                    vv = pc_len[j]
                best_s = pc_s0[j] + vv
        if best < np.inf:
            return 0, best_s, elapsed + best, t, px + dx * best, py + dy * best
        if elapsed + s > tcap:
            return 2, 0.0, elapsed, t, px, py
        qx = px + dx * s
        qy = py + dy * s
        c = _near_vertex(xy, sing, t, k, qx, qy, eps)
        if c >= 0:
            return 1, 0.0, elapsed + s, t, qx, qy
        elapsed += s
        px = qx + shift[t, k, 0]
        py = qy + shift[t, k, 1]
        t = nbr[t, k]
        steps += 1
        if steps > max_steps:
            return 2, 0.0, elapsed, t, px, py


@njit(cache=True, nogil=True)
def iet_orbit(breaks, trans, length, x, n, circular):
    """Positions x, T(x), ..., T^n(x); returns (positions, steps_done).

    ``breaks`` are the interior discontinuities; hitting one exactly stops.
    """
    out = np.empty(n + 1)
    out[0] = x
    for i in range(n):
        j = np.searchsorted(breaks, x, side="right")
        if j > 0 and x == breaks[j - 1]:
            return out, i
        x = x + trans[j]
        if circular:
            if x >= length:
                x -= length
            elif x < 0.0:
                x += length
        out[i + 1] = x
    return out, n


@njit(cache=True, nogil=True)
def _poly_dist(pv, m, px, py):
    inside = False
    best = np.inf
    for i in range(m):
        ax, ay = pv[i, 0], pv[i, 1]
        j = (i + 1) % m
        bx, by = pv[j, 0], pv[j, 1]
        if (ay > py) != (by > py):
            if px < ax + (py - ay) * (bx - ax) / (by - ay):
                inside = not inside
        ex, ey = bx - ax, by - ay
        u = ((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey)
        u = min(1.0, max(0.0, u))
        d = np.hypot(px - ax - u * ex, py - ay - u * ey)
        if d < best:
            best = d
    return 0.0 if inside else best


@njit(cache=True, nogil=True)
def unfold_candidates(pv, nv, sq, sx, sy, p0, x0, y0, pt, yx, yy, r_max, max_depth, max_nodes):
    """Developed copies of the point (yx, yy) in polygon ``pt`` within ``r_max`` of
    (x0, y0) in polygon ``p0``, found by breadth-first unfolding of polygons.

    pv[p, i] are polygon vertices (nv[p] of them); crossing edge e of p enters
    sq[p, e] with the origin moved by -(sx, sy)[p, e]. Returns (count, vx, vy)
    with the displacement vectors from x to each copy.
    """
    qp = np.empty(max_nodes, np.int64)
    qx = np.empty(max_nodes)
    qy = np.empty(max_nodes)
    qd = np.empty(max_nodes, np.int64)
    vx = np.empty(max_nodes)
    vy = np.empty(max_nodes)
    qp[0] = p0
    qx[0] = 0.0
    qy[0] = 0.0
    qd[0] = 0
    head = 0
    tail = 1
    nc = 0
    while head < tail:
        p = qp[head]
        ox = qx[head]
        oy = qy[head]
        depth = qd[head]
        head += 1
        if p == pt:
            wx = yx + ox - x0
            wy = yy + oy - y0
            if np.hypot(wx, wy) <= r_max:
                vx[nc] = wx
                vy[nc] = wy
                nc += 1
        if depth >= max_depth:
            continue
        for e in range(nv[p]):
            q = sq[p, e]
            nox = ox - sx[p, e]
            noy = oy - sy[p, e]
            dup = False
            for k in range(tail):
                if qp[k] == q and abs(qx[k] - nox) < 1e-9 and abs(qy[k] - noy) < 1e-9:
                    dup = True
                    break
            if dup:
                continue
            if _poly_dist(pv[q], nv[q], x0 - nox, y0 - noy) > r_max:
                continue
            if tail >= max_nodes:
                return -1, vx, vy
            qp[tail] = q
            qx[tail] = nox
            qy[tail] = noy
            qd[tail] = depth + 1
            tail += 1
    return nc, vx, vy
