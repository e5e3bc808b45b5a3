"""Translation surfaces built from polygons glued along parallel edges.

A surface is a list of counterclockwise polygons plus a perfect matching of
their edges. Matched edges must be parallel, of equal length and of opposite
orientation, so the identification is a translation. Coordinates are kept
exactly (``fractions.Fraction``) when every input is rational; everything
numeric downstream runs on a float triangulation built once at construction.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Vec2",
    "SurfacePoint",
    "Direction",
    "Singularity",
    "TranslationSurface",
    "SurfaceError",
    "MismatchedEdge",
    "UnpairedEdge",
    "DegenerateSurface",
    "BadParameter",
    "build_surface",
    "builtin",
    "load_surface",
    "surface_from_json",
    "vorobets_constant",
    "VorobetsConstant",
]

GLUE_RTOL = 1e-12
TWO_PI = 2.0 * math.pi


class SurfaceError(ValueError):
    pass


class MismatchedEdge(SurfaceError):
    pass


class UnpairedEdge(SurfaceError):
    pass


class DegenerateSurface(SurfaceError):
    pass


class BadParameter(SurfaceError):
    pass


@dataclass(frozen=True, slots=True)
class Vec2:
    x: float | Fraction
    y: float | Fraction

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, k) -> "Vec2":
        return Vec2(self.x * k, self.y * k)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec2":
        return Vec2(-self.x, -self.y)

    def cross(self, other: "Vec2"):
        return self.x * other.y - self.y * other.x

    def dot(self, other: "Vec2"):
        return self.x * other.x + self.y * other.y

    def norm(self) -> float:
        return math.hypot(float(self.x), float(self.y))

    def as_float(self) -> tuple[float, float]:
        return float(self.x), float(self.y)


@dataclass(frozen=True, slots=True)
class SurfacePoint:
    polygon: int
    pos: Vec2

    @classmethod
    def of(cls, polygon: int, x, y) -> "SurfacePoint":
        return cls(polygon, Vec2(x, y))


@dataclass(frozen=True, slots=True)
class Direction:
    """A direction in turn units; the geometric angle is ``2*pi*tau``."""

    tau: float

    def __post_init__(self):
        t = float(self.tau) % 1.0
        if t >= 1.0:  # -tiny % 1.0 rounds to 1.0
            t = 0.0
        object.__setattr__(self, "tau", t)

    @classmethod
    def from_vector(cls, v) -> "Direction":
        x, y = (v.as_float() if isinstance(v, Vec2) else (float(v[0]), float(v[1])))
        return cls(math.atan2(y, x) / TWO_PI)

    @property
    def angle(self) -> float:
        return TWO_PI * self.tau

    def unit(self) -> tuple[float, float]:
        a = self.angle
        return math.cos(a), math.sin(a)

    def unoriented(self) -> "Direction":
        return Direction(self.tau % 0.5)


@dataclass(frozen=True)
class Singularity:
    id: int
    cone_multiple: int  # cone angle = 2*pi*cone_multiple
    cone_angle: float
    corners: tuple[tuple[int, int], ...]
    marked: bool = False

    @property
    def multiplicity(self) -> int:
        return self.cone_multiple - 1


def _to_number(v):
    """Parse a coordinate: ints/Fractions stay exact, "p/q" and decimal strings too."""
    if isinstance(v, (Fraction, int)) and not isinstance(v, bool):
        return Fraction(v)
    if isinstance(v, str):
        s = v.strip()
        try:
            return Fraction(s)
        except ValueError:
            raise BadParameter(f"cannot parse coordinate {v!r}") from None
    if isinstance(v, float):
        return v
    try:
        return float(v)
    except (TypeError, ValueError):
        raise BadParameter(f"cannot parse coordinate {v!r}") from None


def _signed_area(pts) -> float | Fraction:
    n = len(pts)
    a = 0
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        a += x0 * y1 - x1 * y0
    return a / 2


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return (
        (o1 == 0 and on_seg(p1, p2, q1))
        or (o2 == 0 and on_seg(p1, p2, q2))
        or (o3 == 0 and on_seg(q1, q2, p1))
        or (o4 == 0 and on_seg(q1, q2, p2))
    )


def _is_simple(pts) -> bool:
    n = len(pts)
    for i in range(n):
        a1, a2 = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_intersect(a1, a2, pts[j], pts[(j + 1) % n]):
                return False
    return True


def _ear_clip(pts: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate a simple CCW polygon by ear clipping (no new vertices)."""
    idx = list(range(len(pts)))
    tris = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    scale = float(np.ptp(pts, axis=0).max()) or 1.0
    eps = 1e-14 * scale * scale
    while len(idx) > 3:
        n = len(idx)
        best = None
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = pts[i0], pts[i1], pts[i2]
            area = cross(a, b, c)
            if area <= eps:
                continue
            ok = True
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = pts[j]
                if cross(a, b, p) >= -eps and cross(b, c, p) >= -eps and cross(c, a, p) >= -eps:
                    ok = False
                    break
            if ok:
                # prefer fat ears: maximise the smallest angle-ish quality
                la, lb, lc = (np.linalg.norm(b - a), np.linalg.norm(c - b), np.linalg.norm(a - c))
                quality = area / max(la, lb, lc) ** 2
                if best is None or quality > best[0]:
                    best = (quality, k)
        if best is None:
            raise DegenerateSurface("polygon could not be triangulated")
        k = best[1]
        tris.append((idx[k - 1], idx[k], idx[(k + 1) % n]))
        del idx[k]
    tris.append(tuple(idx))
    return tris


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


class TranslationSurface:
    """Immutable translation surface.

    Use :func:`build_surface` or :func:`builtin` rather than the constructor.
    Area-type quantities used for cylinder thresholds are fractions of
    ``total_area``.
    """

    def __init__(self, polygons, gluings, marked_points=(), name: str | None = None):
        self.name = name
        self._build(polygons, gluings, marked_points)

    # -- construction -------------------------------------------------------
    def _build(self, polygons, gluings, marked_points):
        if not polygons:
            raise DegenerateSurface("no polygons")
        polys = [[(_to_number(x), _to_number(y)) for x, y in poly] for poly in polygons]
        self.exact = all(isinstance(c, Fraction) for poly in polys for pt in poly for c in pt)
        if not self.exact:
            polys = [[(float(x), float(y)) for x, y in poly] for poly in polys]
        for k, poly in enumerate(polys):
            if len(poly) < 3:
                raise DegenerateSurface(f"polygon {k} has fewer than 3 vertices")
            if _signed_area(poly) <= 0:
                raise DegenerateSurface(f"polygon {k} is not counterclockwise with positive area")
            if not _is_simple(poly):
                raise DegenerateSurface(f"polygon {k} is not simple")
        self.polygons: tuple[tuple[Vec2, ...], ...] = tuple(tuple(Vec2(x, y) for x, y in p) for p in polys)

        offsets = np.cumsum([0] + [len(p) for p in polys])
        self._vertex_offset = offsets
        n_edges = int(offsets[-1])

        def eid(p: int, e: int) -> int:
            if not (0 <= p < len(polys)) or not (0 <= e < len(polys[p])):
                raise BadParameter(f"edge ({p}, {e}) does not exist")
            return int(offsets[p]) + e

        partner = [-1] * n_edges
        glist = []
        for g in gluings:
            pa, ea, pb, eb = (int(v) for v in g)
            a, b = eid(pa, ea), eid(pb, eb)
            if a == b:
                raise MismatchedEdge(f"edge ({pa}, {ea}) glued to itself")
            for e, (p, i) in ((a, (pa, ea)), (b, (pb, eb))):
                if partner[e] != -1:
                    raise MismatchedEdge(f"edge {(p, i)} appears in more than one gluing")
            partner[a], partner[b] = b, a
            va = self.edge_vector(pa, ea)
            vb = self.edge_vector(pb, eb)
            if self.exact:
                if va + vb != Vec2(0, 0):
                    raise MismatchedEdge(f"edges ({pa},{ea}) and ({pb},{eb}) are not opposite translates")
            else:
                la = va.norm()
                if (va + vb).norm() > GLUE_RTOL * max(la, vb.norm()):
                    raise MismatchedEdge(f"edges ({pa},{ea}) and ({pb},{eb}) are not opposite translates")
            glist.append((pa, ea, pb, eb))
        for e, q in enumerate(partner):
            if q == -1:
                p = int(np.searchsorted(offsets, e, side="right") - 1)
                raise UnpairedEdge(f"edge ({p}, {e - int(offsets[p])}) is not glued")
        self.gluings: tuple[tuple[int, int, int, int], ...] = tuple(glist)
        self._partner = partner

        # connectivity
        uf_poly = _UnionFind(len(polys))
        for pa, _, pb, _ in glist:
            uf_poly.union(pa, pb)
        if len({uf_poly.find(i) for i in range(len(polys))}) != 1:
            raise DegenerateSurface("surface is not connected")

        # vertex classes: start of edge a <-> end of its partner
        uf = _UnionFind(n_edges)
        for pa, ea, pb, eb in glist:
            na, nb = len(polys[pa]), len(polys[pb])
            uf.union(eid(pa, ea), eid(pb, (eb + 1) % nb))
            uf.union(eid(pa, (ea + 1) % na), eid(pb, eb))
        roots = sorted({uf.find(v) for v in range(n_edges)})
        root_to_class = {r: k for k, r in enumerate(roots)}
        self._vertex_class = np.array([root_to_class[uf.find(v)] for v in range(n_edges)], dtype=np.int64)

        corner_angle = np.empty(n_edges)
        for p, poly in enumerate(self.polygons):
            n = len(poly)
            for i in range(n):
                a = poly[(i + 1) % n] - poly[i]
                b = poly[i - 1] - poly[i]
                ang = math.atan2(float(a.cross(b)), float(a.dot(b)))
                if ang <= 0:
                    ang += TWO_PI
                corner_angle[int(offsets[p]) + i] = ang
        self._corner_angle = corner_angle

        marked = set()
        for p, v in marked_points:
            marked.add(int(self._vertex_class[eid(int(p), int(v))]))

        classes = []
        for k in range(len(roots)):
            members = np.nonzero(self._vertex_class == k)[0]
            total = float(corner_angle[members].sum())
            mult = round(total / TWO_PI)
            if mult < 1 or abs(total - TWO_PI * mult) > 1e-9 * max(1.0, total):
                raise DegenerateSurface(f"vertex class {k} has cone angle {total}, not a multiple of 2*pi")
            corners = []
            for v in members:
                p = int(np.searchsorted(offsets, v, side="right") - 1)
                corners.append((p, int(v - offsets[p])))
            classes.append((mult, total, tuple(corners), k in marked))
        self._classes = classes

        V, E, F = len(classes), len(glist), len(polys)
        chi = V - E + F
        if chi > 2 or chi % 2:
            raise DegenerateSurface(f"Euler characteristic {chi} is impossible")
        self.genus = (2 - chi) // 2
        excess = sum(m - 1 for m, *_ in classes)
        if excess != 2 * self.genus - 2:
            raise DegenerateSurface("Gauss-Bonnet check failed")

        self.vertex_singular = [m != 1 or mk for m, _, _, mk in classes]
        sing = []
        self._class_to_sing = {}
        for k, (m, total, corners, mk) in enumerate(classes):
            if m != 1 or mk:
                self._class_to_sing[k] = len(sing)
                sing.append(Singularity(len(sing), m, total, corners, marked=mk and m == 1))
        self.singularities: tuple[Singularity, ...] = tuple(sing)

        area = sum(_signed_area([(p.x, p.y) for p in poly]) for poly in self.polygons)
        if area <= 0:
            raise DegenerateSurface("total area must be positive")
        self.total_area = area
        self._triangulate()

    def _triangulate(self):
        tri_xy, tri_poly, tri_corner = [], [], []
        edge_owner = {}  # (poly, i, j) directed polygon-vertex pair -> (tri, local edge)
        for p, poly in enumerate(self.polygons):
            pts = np.array([v.as_float() for v in poly])
            for (i0, i1, i2) in _ear_clip(pts):
                t = len(tri_xy)
                tri_xy.append(pts[[i0, i1, i2]])
                tri_poly.append(p)
                tri_corner.append((i0, i1, i2))
                for k, (a, b) in enumerate(((i0, i1), (i1, i2), (i2, i0))):
                    edge_owner[(p, a, b)] = (t, k)
        nt = len(tri_xy)
        nbr = np.full((nt, 3), -1, dtype=np.int64)
        nbr_edge = np.full((nt, 3), -1, dtype=np.int64)
        shift = np.zeros((nt, 3, 2))
        pedge = np.full((nt, 3), -1, dtype=np.int64)
        for (p, a, b), (t, k) in edge_owner.items():
            n = len(self.polygons[p])
            if b == (a + 1) % n:
                e = int(self._vertex_offset[p]) + a
                q_e = self._partner[e]
                q = int(np.searchsorted(self._vertex_offset, q_e, side="right") - 1)
                j = q_e - int(self._vertex_offset[q])
                m = len(self.polygons[q])
                t2, k2 = edge_owner[(q, j, (j + 1) % m)]
                # start of edge a maps to end of partner edge
                sx, sy = (self.polygons[q][(j + 1) % m] - self.polygons[p][a]).as_float()
                shift[t, k] = (sx, sy)
                pedge[t, k] = e
            else:
                t2, k2 = edge_owner[(p, b, a)]
            nbr[t, k] = t2
            nbr_edge[t, k] = k2
        self.tri_xy = np.ascontiguousarray(np.array(tri_xy, dtype=np.float64))
        self.tri_poly = np.array(tri_poly, dtype=np.int64)
        self.tri_corner = np.array(tri_corner, dtype=np.int64)
        self.tri_nbr = nbr
        self.tri_nbr_edge = nbr_edge
        self.tri_shift = shift
        self.tri_pedge = pedge
        vclass = np.array(
            [[self._vertex_class[int(self._vertex_offset[p]) + c] for c in cs] for p, cs in zip(tri_poly, tri_corner)],
            dtype=np.int64,
        )
        self.tri_vclass = vclass
        self.tri_sing = np.array([[self.vertex_singular[c] for c in row] for row in vclass], dtype=np.bool_)
        a = self.tri_xy
        self.tri_area = 0.5 * (
            (a[:, 1, 0] - a[:, 0, 0]) * (a[:, 2, 1] - a[:, 0, 1]) - (a[:, 1, 1] - a[:, 0, 1]) * (a[:, 2, 0] - a[:, 0, 0])
        )
        self.poly_tris = [np.nonzero(self.tri_poly == p)[0] for p in range(len(self.polygons))]

    # -- accessors ---------------------------------------------------------
    def edge_vector(self, p: int, e: int) -> Vec2:
        poly = self.polygons[p]
        return poly[(e + 1) % len(poly)] - poly[e]

    @property
    def n_polygons(self) -> int:
        return len(self.polygons)

    @property
    def multiplicity_sum(self) -> int:
        """Sum of multiplicities of the cone points (marked points count 0)."""
        return sum(s.multiplicity for s in self.singularities)

    @property
    def sigma(self) -> Fraction:
        """``1/(2g-2)``; for the torus the whole surface is one cylinder, so 1."""
        if self.genus >= 2:
            return Fraction(1, 2 * self.genus - 2)
        return Fraction(1)

    @property
    def cone_angles(self) -> list[float]:
        return [s.cone_angle for s in self.singularities]

    def vertex_class(self, polygon: int, vertex: int) -> int:
        return int(self._vertex_class[int(self._vertex_offset[polygon]) + vertex])

    def singularity_of_class(self, cls: int) -> int | None:
        return self._class_to_sing.get(int(cls))

    def edge_partner(self, polygon: int, edge: int) -> tuple[int, int]:
        q_e = self._partner[int(self._vertex_offset[polygon]) + edge]
        q = int(np.searchsorted(self._vertex_offset, q_e, side="right") - 1)
        return q, q_e - int(self._vertex_offset[q])

    @cached_property
    def shortest_edge(self) -> float:
        return min(self.edge_vector(p, e).norm() for p in range(self.n_polygons) for e in range(len(self.polygons[p])))

    @cached_property
    def diameter_bound(self) -> float:
        """Crude upper bound on the diameter: sum of polygon diameters."""
        total = 0.0
        for poly in self.polygons:
            pts = np.array([v.as_float() for v in poly])
            total += float(np.max(np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)))
        return total

    @property
    def eps_sing(self) -> float:
        return 1e-12 * self.diameter_bound

    @cached_property
    def shortest_saddle(self) -> float:
        from .cylinders import shortest_saddle

        return shortest_saddle(self)

    # -- serialization -----------------------------------------------------
    def to_spec(self) -> dict:
        def fmt(c):
            return str(c) if isinstance(c, Fraction) else repr(float(c))

        marked = []
        for s in self.singularities:
            if s.marked:
                marked.append(list(s.corners[0]))
        return {
            "polygons": [[[fmt(v.x), fmt(v.y)] for v in poly] for poly in self.polygons],
            "gluings": [list(g) for g in self.gluings],
            "marked_points": marked,
        }

    def info(self) -> dict:
        return {
            "name": self.name,
            "genus": self.genus,
            "sigma": str(self.sigma),
            "area": str(self.total_area) if self.exact else float(self.total_area),
            "exact": self.exact,
            "multiplicity_sum": self.multiplicity_sum,
            "singularities": [
                {
                    "id": s.id,
                    "cone_angle_over_2pi": s.cone_multiple,
                    "multiplicity": s.multiplicity,
                    "marked": s.marked,
                    "corners": [list(c) for c in s.corners],
                }
                for s in self.singularities
            ],
        }

    def __repr__(self) -> str:
        label = self.name or f"{self.n_polygons} polygons"
        return f"TranslationSurface({label}, genus={self.genus}, area={self.total_area})"


def build_surface(polygons, gluings, marked_points=(), name=None) -> TranslationSurface:
    return TranslationSurface(polygons, gluings, marked_points, name=name)


def surface_from_json(doc: dict | str, name=None) -> TranslationSurface:
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        return build_surface(doc["polygons"], doc["gluings"], doc.get("marked_points", ()), name=name)
    except KeyError as exc:
        raise BadParameter(f"surface spec missing key {exc}") from None


def _square_torus() -> TranslationSurface:
    pts = [(0, 0), (1, 0), (1, 1), (0, 1)]
    return build_surface([pts], [(0, 0, 0, 2), (0, 1, 0, 3)], marked_points=[(0, 0)], name="square_torus")


def _l_shape(a, b) -> TranslationSurface:
    a, b = Fraction(a), Fraction(b)
    if not (a > 1 and b > 1):
        raise BadParameter("L(a,b) needs a > 1 and b > 1")
    pts = [(0, 0), (1, 0), (a, 0), (a, 1), (1, 1), (1, b), (0, b), (0, 1)]
    gl = [(0, 0, 0, 5), (0, 1, 0, 3), (0, 2, 0, 7), (0, 4, 0, 6)]
    return build_surface([pts], gl, name=f"L({a},{b})")


def _regular_octagon() -> TranslationSurface:
    r = 1.0 / math.sqrt(2.0)
    pts = [(0.0, 0.0), (1.0, 0.0), (1 + r, r), (1 + r, 1 + r), (1.0, 1 + 2 * r), (0.0, 1 + 2 * r), (-r, 1 + r), (-r, r)]
    return build_surface([pts], [(0, i, 0, i + 4) for i in range(4)], name="regular_octagon")


_L_RE = re.compile(r"^L\(\s*([^,]+)\s*,\s*([^)]+)\s*\)$")


def builtin(name: str) -> TranslationSurface:
    """``square_torus``, ``regular_octagon`` or ``L(a,b)`` with rational a, b > 1."""
    name = name.strip()
    if name == "square_torus":
        return _square_torus()
    if name == "regular_octagon":
        return _regular_octagon()
    m = _L_RE.match(name)
    if m:
        try:
            a, b = Fraction(m.group(1)), Fraction(m.group(2))
        except ValueError:
            raise BadParameter(f"bad L parameters in {name!r}") from None
        return _l_shape(a, b)
    raise BadParameter(f"unknown builtin surface {name!r}")


def load_surface(ref: str) -> TranslationSurface:
    """Resolve ``builtin:NAME`` or a path to a JSON surface spec."""
    if ref.startswith("builtin:"):
        return builtin(ref[len("builtin:"):])
    with open(ref) as fh:
        return surface_from_json(json.load(fh), name=ref)


@dataclass(frozen=True)
class VorobetsConstant:
    """``c = 2**(2**(4m)) * sqrt(s)``, kept in log form because it overflows floats."""

    m: int
    s: float
    log2: float = field(init=False)

    def __post_init__(self):
        if self.m < 0 or self.s <= 0:
            raise BadParameter("need m >= 0 and s > 0")
        if self.m > 64:
            raise OverflowError("log2 representation only supported for m <= 64")
        object.__setattr__(self, "log2", float(2 ** (4 * self.m)) + 0.5 * math.log2(self.s))

    @property
    def value(self):
        """Exact-exponent value as an ``mpmath.mpf``."""
        import mpmath

        return mpmath.ldexp(mpmath.sqrt(mpmath.mpf(self.s)), 2 ** (4 * self.m))

    def as_float(self) -> float:
        """Float value, ``inf`` when it does not fit."""
        return math.inf if self.log2 > 1023 else 2.0 ** self.log2

    def exceeds(self, x: float) -> bool:
        return x <= 0 or self.log2 >= math.log2(x)


def vorobets_constant(surface: TranslationSurface | None = None, *, m: int | None = None, s: float | None = None):
    if surface is not None:
        m = surface.multiplicity_sum if m is None else m
        s = surface.shortest_saddle if s is None else s
    if m is None or s is None:
        raise BadParameter("need a surface or both m and s")
    return VorobetsConstant(int(m), float(s))


def corners_of(surface: TranslationSurface) -> Iterable[tuple[int, int]]:
    for p, poly in enumerate(surface.polygons):
        for i in range(len(poly)):
            yield p, i
