"""First-return interval exchange maps of a directional flow, and recurrence scans.

The domain of an IET is [0, length) parametrised by arc length along a
straight transversal. When the transversal closes up (its end is its start)
the map and the recurrence distance are taken mod ``length``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .flow import canonical, locate
from .series import SeriesSpec
from .surface import BadParameter, Direction, SurfacePoint, TranslationSurface, Vec2

__all__ = [
    "IETError",
    "NoReturn",
    "SingularEndpoint",
    "HitBreakpoint",
    "Transversal",
    "IET",
    "RecurrenceSequence",
    "first_return_iet",
    "direct_return",
    "default_transversal",
    "parse_transversal",
    "iet_apply",
    "iet_orbit",
    "recurrence_scan",
]

RecurrenceSequence = SeriesSpec


class IETError(RuntimeError):
    pass


class NoReturn(IETError):
    """The flow did not come back to the transversal within the time cap."""


class SingularEndpoint(IETError):
    """The transversal runs into a singularity before its end."""


class HitBreakpoint(IETError):
    def __init__(self, step: int, x: float | None = None):
        super().__init__(f"orbit hit a breakpoint at step {step}")
        self.step = step
        self.x = x


@dataclass(frozen=True)
class Transversal:
    base: SurfacePoint
    direction: Direction
    length: float

    def __post_init__(self):
        if not self.length > 0:
            raise BadParameter("transversal length must be positive")


def default_transversal(surface: TranslationSurface) -> Transversal:
    """Horizontal closed transversal for the builtins.

    square_torus: the circle y = 0 through the marked point.
    L(a,b): the core y = 1/2 of the long horizontal cylinder.
    """
    name = surface.name or ""
    if name == "square_torus":
        return Transversal(SurfacePoint.of(0, 0.0, 0.0), Direction(0.0), 1.0)
    m = re.match(r"^L\((.+),(.+)\)$", name)
    if m:
        a = float(surface.polygons[0][2].x)
        return Transversal(SurfacePoint.of(0, 0.0, 0.5), Direction(0.0), a)
    raise BadParameter(f"no default transversal for {name or 'this surface'}; give one explicitly")


def parse_transversal(text: str) -> Transversal:
    """``poly,x,y,tau,length``."""
    try:
        p, x, y, tau, length = text.split(",")
        return Transversal(SurfacePoint.of(int(p), float(x), float(y)), Direction(float(tau)), float(length))
    except ValueError:
        raise BadParameter(f"transversal must be poly,x,y,tau,length, got {text!r}") from None


@dataclass(frozen=True)
class IET:
    """Piecewise translation of [0, domain_length).

    Piece j is [b_{j-1}, b_j) with b_{-1} = 0 and b_last = domain_length;
    it is moved by ``translations[j]`` (then reduced mod the length when
    ``circular``).
    """

    domain_length: float
    breakpoints: tuple[float, ...]
    translations: tuple[float, ...]
    circular: bool = False
    _breaks: np.ndarray = field(init=False, repr=False, compare=False)
    _trans: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))
        object.__setattr__(self, "translations", tuple(float(t) for t in self.translations))
        if len(self.translations) != len(self.breakpoints) + 1:
            raise ValueError("need one translation per piece")
        b = np.asarray(self.breakpoints, dtype=np.float64)
        if np.any(np.diff(b) <= 0) or (len(b) and (b[0] <= 0 or b[-1] >= self.domain_length)):
            raise ValueError("breakpoints must be strictly increasing inside (0, length)")
        object.__setattr__(self, "_breaks", b)
        object.__setattr__(self, "_trans", np.asarray(self.translations, dtype=np.float64))

    @classmethod
    def rotation(cls, alpha: float, length: float = 1.0) -> "IET":
        """x -> x + alpha mod length as a two-piece exchange."""
        alpha = alpha % length
        if alpha == 0:
            return cls(length, (), (0.0,), circular=True)
        return cls(length, (length - alpha,), (alpha, alpha - length), circular=True)

    @property
    def n_pieces(self) -> int:
        return len(self.translations)

    def pieces(self) -> list[tuple[float, float]]:
        ends = (0.0,) + self.breakpoints + (self.domain_length,)
        return list(zip(ends[:-1], ends[1:]))

    def piece_of(self, x: float) -> int:
        return int(np.searchsorted(self._breaks, x, side="right"))

    def _wrap(self, y: float) -> float:
        if self.circular:
            y %= self.domain_length
        return y

    def __call__(self, x: float) -> float:
        self._check(x)
        j = self.piece_of(x)
        if j > 0 and x == self.breakpoints[j - 1]:
            raise HitBreakpoint(0, x)
        return self._wrap(x + self.translations[j])

    def _check(self, x: float):
        if not (0.0 <= x < self.domain_length):
            raise ValueError(f"{x} is outside [0, {self.domain_length})")

    def image_intervals(self) -> list[tuple[float, float, int]]:
        """Images (lo, hi, piece) of the pieces, split at the wrap point, sorted."""
        out = []
        L = self.domain_length
        for j, (a, b) in enumerate(self.pieces()):
            lo, hi = a + self.translations[j], b + self.translations[j]
            if self.circular:
                shift = math.floor(lo / L) * L
                lo, hi = lo - shift, hi - shift
                if hi > L:
                    out.append((lo, L, j))
                    out.append((0.0, hi - L, j))
                    continue
            out.append((lo, hi, j))
        return sorted(out)

    def tiling_defect(self) -> float:
        """Largest gap or overlap between consecutive images, plus the total-length error."""
        ims = self.image_intervals()
        worst = abs(ims[0][0]) + abs(ims[-1][1] - self.domain_length)
        for (_, h0, _), (l1, _, _) in zip(ims, ims[1:]):
            worst = max(worst, abs(l1 - h0))
        total = sum(h - lo for lo, h, _ in ims)
        return max(worst, abs(total - self.domain_length))

    def inverse(self) -> "IET":
        ims = self.image_intervals()
        L = self.domain_length
        bps, trs = [], []
        for k, (lo, hi, j) in enumerate(ims):
            if k > 0:
                bps.append(lo)
            trs.append(-self.translations[j])
        # images share endpoints up to rounding; snap to a strictly increasing list
        keep_b, keep_t = [], [trs[0]]
        for b, t in zip(bps, trs[1:]):
            if 0 < b < L and (not keep_b or b > keep_b[-1]):
                keep_b.append(b)
                keep_t.append(t)
        return IET(L, tuple(keep_b), tuple(keep_t), self.circular)

    def to_json(self) -> dict:
        return {
            "domain_length": self.domain_length,
            "breakpoints": list(self.breakpoints),
            "translations": list(self.translations),
            "circular": self.circular,
        }


# -- construction from a surface ---------------------------------------------

@dataclass
class _Pieces:
    poly: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    ex: np.ndarray
    ey: np.ndarray
    length: np.ndarray
    s0: np.ndarray
    primary: np.ndarray  # False for the copies on the far side of glued edges

    def args(self):
        return self.poly, self.ax, self.ay, self.ex, self.ey, self.length, self.s0

    def point_at(self, s: float) -> tuple[int, float, float]:
        idx = np.nonzero(self.primary & (self.s0 <= s) & (s <= self.s0 + self.length))[0]
        j = int(idx[0]) if len(idx) else int(np.nonzero(self.primary)[0][-1])
        v = s - self.s0[j]
        return int(self.poly[j]), self.ax[j] + v * self.ex[j], self.ay[j] + v * self.ey[j]


def _trace_transversal(surface: TranslationSurface, tr: Transversal):
    tx, ty = tr.direction.unit()
    tri, px, py = locate(surface, tr.base, (tx, ty))
    steps = int(40 * tr.length / surface.shortest_edge) + 1000
    status, n, tris, ex, ey, t0, sl, _, _, _, _ = K.chain(
        surface.tri_xy, surface.tri_nbr, surface.tri_shift, surface.tri_sing,
        tri, px, py, tx, ty, float(tr.length), surface.eps_sing, steps,
    )
    if status == K.STEP_LIMIT:
        raise SingularEndpoint("transversal could not be traced")
    if status == K.SINGULAR and t0[n - 1] + sl[n - 1] < tr.length * (1 - 1e-9):
        raise SingularEndpoint(f"transversal meets a singularity at {t0[n - 1] + sl[n - 1]:.12g}")
    tol = 1e-12 * max(1.0, surface.diameter_bound)
    rows = []
    for j in range(n):
        if sl[j] <= tol:
            continue
        t = int(tris[j])
        p = int(surface.tri_poly[t])
        rows.append((p, ex[j], ey[j], sl[j], t0[j], True))
        ax, ay = ex[j], ey[j]
        bx, by = ax + tx * sl[j], ay + ty * sl[j]
        for k in range(3):
            if surface.tri_pedge[t, k] < 0:
                continue
            u = surface.tri_xy[t, k]
            w = surface.tri_xy[t, (k + 1) % 3] - u
            wl = math.hypot(*w)
            if (abs(w[0] * (ay - u[1]) - w[1] * (ax - u[0])) / wl < tol
                    and abs(w[0] * (by - u[1]) - w[1] * (bx - u[0])) / wl < tol):
                sx, sy = surface.tri_shift[t, k]
                q = int(surface.tri_poly[surface.tri_nbr[t, k]])
                rows.append((q, ax + sx, ay + sy, sl[j], t0[j], False))
    end_t = int(tris[n - 1])
    end = canonical(surface, int(surface.tri_poly[end_t]), ex[n - 1] + tx * sl[n - 1], ey[n - 1] + ty * sl[n - 1])
    start = canonical(surface, tr.base.polygon, *tr.base.pos.as_float())
    circular = (end.polygon == start.polygon
                and math.hypot(*(np.subtract(end.pos.as_float(), start.pos.as_float()))) < 1e-9 * max(1.0, tr.length))
    cols = list(zip(*rows))
    pcs = _Pieces(
        np.array(cols[0], np.int64), np.array(cols[1]), np.array(cols[2]),
        np.full(len(rows), tx), np.full(len(rows), ty),
        np.array(cols[3]), np.array(cols[4]), np.array(cols[5], np.bool_),
    )
    return pcs, circular, end


def _hit(surface, pcs, t, px, py, dx, dy, tcap, min_along):
    steps = int(40 * tcap / surface.shortest_edge) + 1000
    return K.first_hit(
        surface.tri_xy, surface.tri_nbr, surface.tri_shift, surface.tri_sing, surface.tri_poly,
        t, px, py, dx, dy, tcap, surface.eps_sing, steps, *pcs.args(), min_along,
    )


def _return_from(surface, pcs, s, d, tcap, min_along):
    p, x, y = pcs.point_at(s)
    t, x, y = locate(surface, SurfacePoint(p, Vec2(x, y)), d)
    return _hit(surface, pcs, t, x, y, d[0], d[1], tcap, min_along)


def first_return_iet(surface: TranslationSurface, direction: Direction | float, transversal: Transversal | None = None,
                     cap: float | None = None, check_pairs: int = 100) -> IET:
    """First-return map of the flow in ``direction`` to ``transversal``.

    Breakpoints are where backward separatrices (and, for an open
    transversal, the backward orbits of its endpoints) first meet the
    transversal. Each piece's translation comes from flowing its midpoint.
    ``check_pairs`` random same-piece pairs are then flowed directly and
    must be moved rigidly.
    """
    if not isinstance(direction, Direction):
        direction = Direction(direction)
    tr = transversal or default_transversal(surface)
    d = direction.unit()
    tdir = tr.direction.unit()
    if abs(d[0] * tdir[1] - d[1] * tdir[0]) < 1e-9:
        raise BadParameter("flow direction is parallel to the transversal")
    if cap is None:
        cap = 1e4 * tr.length
    pcs, circular, end = _trace_transversal(surface, tr)
    L = tr.length
    min_along = 1e-12 * max(1.0, surface.diameter_bound)
    back = (-d[0], -d[1])

    starts = []
    xy = surface.tri_xy
    for t in range(len(xy)):
        for c in range(3):
            if not surface.tri_sing[t, c]:
                continue
            e1 = xy[t, (c + 1) % 3] - xy[t, c]
            e2 = xy[t, (c + 2) % 3] - xy[t, c]
            if e1[0] * back[1] - e1[1] * back[0] >= 0 and back[0] * e2[1] - back[1] * e2[0] > 0:
                starts.append((t, xy[t, c, 0], xy[t, c, 1]))
    if not circular:
        for pt in (tr.base, end):
            starts.append(locate(surface, pt, back))

    raw = []
    for t, x, y in starts:
        st, s_hit, _, _, _, _ = _hit(surface, pcs, t, x, y, back[0], back[1], cap, min_along)
        if st == 2:
            raise NoReturn(f"backward orbit did not reach the transversal within {cap}")
        if st == 0:
            raw.append(s_hit)
    tol = 1e-10 * max(1.0, L)
    bps = []
    for b in sorted(raw):
        if tol < b < L - tol and (not bps or b - bps[-1] > tol):
            bps.append(b)

    ends = [0.0] + bps + [L]
    trans = []
    for a, b in zip(ends[:-1], ends[1:]):
        m = 0.5 * (a + b)
        st, s_hit, _, _, _, _ = _return_from(surface, pcs, m, d, cap, min_along)
        if st == 2:
            raise NoReturn(f"no return within {cap} from s={m:.6g}")
        if st == 1:
            raise IETError(f"orbit of s={m:.6g} hit a singularity; a breakpoint is missing")
        trans.append(s_hit - m)
    iet = IET(L, tuple(bps), tuple(trans), circular)
    if check_pairs:
        _check_isometry(surface, pcs, iet, d, cap, min_along, check_pairs)
    return iet


def direct_return(surface: TranslationSurface, direction: Direction | float, transversal: Transversal,
                  s: float, cap: float | None = None) -> tuple[float, float]:
    """Flow from parameter ``s`` on the transversal until it is met again.

    Returns (s_return, time). Independent of any IET built on the same data.
    """
    if not isinstance(direction, Direction):
        direction = Direction(direction)
    pcs, _, _ = _trace_transversal(surface, transversal)
    cap = 1e4 * transversal.length if cap is None else cap
    st, s_hit, time, *_ = _return_from(surface, pcs, s, direction.unit(), cap,
                                        1e-12 * max(1.0, surface.diameter_bound))
    if st == 2:
        raise NoReturn(f"no return within {cap}")
    if st == 1:
        raise IETError("orbit hit a singularity")
    return float(s_hit), float(time)


def _check_isometry(surface, pcs, iet: IET, d, cap, min_along, n_pairs: int):
    rng = np.random.default_rng(12345)
    pieces = iet.pieces()
    L = iet.domain_length
    for _ in range(n_pairs):
        j = int(rng.integers(len(pieces)))
        a, b = pieces[j]
        xs = a + (b - a) * (0.05 + 0.9 * rng.random(2))
        got = []
        for x in xs:
            st, s_hit, *_ = _return_from(surface, pcs, float(x), d, cap, min_along)
            if st != 0:
                raise IETError(f"direct return from s={x:.6g} failed (status {st})")
            got.append(s_hit)
        for x, s_hit in zip(xs, got):
            pred = iet(float(x))
            err = abs(pred - s_hit)
            if iet.circular:
                err = min(err, L - err)
            if err > 1e-8 * max(1.0, L):
                raise IETError(f"first-return map is not a translation on piece {j}: error {err:.3g}")


# -- iteration ------------------------------------------------------------------

def iet_orbit(iet: IET, x: float, n: int) -> np.ndarray:
    """x, T x, ..., T^n x (n >= 0)."""
    iet._check(x)
    if n < 0:
        raise ValueError("n must be >= 0; use iet_apply for negative powers")
    pos, done = K.iet_orbit(iet._breaks, iet._trans, float(iet.domain_length), float(x), int(n), iet.circular)
    if done < n:
        raise HitBreakpoint(done, float(pos[done]))
    return pos


def iet_apply(iet: IET, x: float, n: int) -> float:
    """T^n x; negative n uses the inverse map."""
    if n == 0:
        iet._check(x)
        return float(x)
    if n < 0:
        return iet_apply(iet.inverse(), x, -n)
    return float(iet_orbit(iet, x, n)[-1])


def recurrence_scan(iet: IET, x: float, seq: SeriesSpec, N: int, tail_from: int | None = None) -> dict:
    """Times n <= N with |T^n x - x| < a_n and the ratios |T^n x - x| / a_n.

    ``min_ratio`` is the minimum over all n <= N. ``tail_min_ratio`` is the
    minimum over n >= ``tail_from`` (default ceil(sqrt N)), the finite
    stand-in for the liminf.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    pos = iet_orbit(iet, x, N)
    dist = np.abs(pos[1:] - x)
    if iet.circular:
        dist = np.minimum(dist, iet.domain_length - dist)
    a = seq.terms(N)
    ratio = dist / a
    hits = (np.nonzero(dist < a)[0] + 1).tolist()
    if tail_from is None:
        tail_from = math.isqrt(N - 1) + 1 if N > 1 else 1
    i = int(np.argmin(ratio))
    tail = ratio[tail_from - 1:]
    return {
        "hits": hits,
        "min_ratio": float(ratio[i]),
        "min_at": i + 1,
        "tail_from": tail_from,
        "tail_min_ratio": float(tail.min()) if len(tail) else None,
        "hit_rows": [(n, float(dist[n - 1]), float(a[n - 1])) for n in hits],
    }
