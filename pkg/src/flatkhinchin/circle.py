"""Measure of finite unions of arcs on the circle [0, 1).

Arcs are balls ``B(center, radius)`` taken mod 1. ``union_measure`` works in
exact rational arithmetic (floats are converted exactly with
``Fraction(float)``), so inequalities between measures hold or fail without
rounding slack. The covering search uses a float sweep since it is a
bisection anyway.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .cylinders import Cylinder, cylinder_sequence
from .surface import TranslationSurface

__all__ = [
    "Arc",
    "ArcUnion",
    "NoCylinders",
    "union_measure",
    "covers_circle",
    "cylinder_arcs",
    "minimal_covering_constant",
    "key_bound_report",
    "sum_bound_check",
    "annulus_count",
]


class NoCylinders(RuntimeError):
    pass


@dataclass(frozen=True)
class Arc:
    center: float | Fraction
    radius: float | Fraction

    def __post_init__(self):
        if isinstance(self.center, str):
            object.__setattr__(self, "center", Fraction(self.center))
        if isinstance(self.radius, str):
            object.__setattr__(self, "radius", Fraction(self.radius))
        if self.radius <= 0:
            raise ValueError("arc radius must be positive")

    def intervals(self, exact: bool = True) -> list[tuple]:
        """The arc as one or two sub-intervals of [0, 1)."""
        conv = Fraction if exact else float
        c, r = conv(self.center), conv(self.radius)
        c = c % 1
        if r >= conv(1) / 2:
            return [(conv(0), conv(1))]
        lo, hi = c - r, c + r
        if lo < 0:
            return [(lo + 1, conv(1)), (conv(0), hi)]
        if hi > 1:
            return [(lo, conv(1)), (conv(0), hi - 1)]
        return [(lo, hi)]


@dataclass(frozen=True)
class ArcUnion:
    """Disjoint sorted intervals of [0, 1)."""

    intervals: tuple[tuple, ...]

    @classmethod
    def of(cls, arcs: Iterable[Arc], exact: bool = True) -> "ArcUnion":
        pieces = sorted(iv for a in arcs for iv in a.intervals(exact))
        merged = []
        for lo, hi in pieces:
            if merged and lo <= merged[-1][1]:
                if hi > merged[-1][1]:
                    merged[-1] = (merged[-1][0], hi)
            else:
                merged.append((lo, hi))
        return cls(tuple(merged))

    @property
    def measure(self):
        return sum((hi - lo for lo, hi in self.intervals), type(self.intervals[0][0])(0) if self.intervals else 0)

    def intersect_measure(self, J: tuple) -> Fraction | float:
        a, b = J
        total = 0
        for lo, hi in self.intervals:
            lo2, hi2 = max(lo, a), min(hi, b)
            if hi2 > lo2:
                total += hi2 - lo2
        return total

    def gaps(self) -> list[tuple]:
        """Uncovered intervals (start, length); a gap may wrap through 0."""
        if not self.intervals:
            return [(0, 1)]
        ivs = self.intervals
        out = []
        for (l0, h0), (l1, h1) in zip(ivs, ivs[1:]):
            if l1 > h0:
                out.append((h0, l1 - h0))
        wrap = ivs[0][0] + (1 - ivs[-1][1])
        if wrap > 0:
            out.append((ivs[-1][1] % 1, wrap))
        return out


def _check_J(J):
    a, b = J
    if not (0 <= a <= b <= 1):
        raise ValueError("J must satisfy 0 <= a <= b <= 1")


def union_measure(arcs: Sequence[Arc], J: tuple = (0, 1), exact: bool = True):
    """Lebesgue measure of (union of arcs) intersected with J, J inside [0, 1]."""
    _check_J(J)
    if exact:
        J = (Fraction(J[0]), Fraction(J[1]))
    return ArcUnion.of(arcs, exact).intersect_measure(J)


def covers_circle(arcs: Sequence[Arc], exact: bool = True) -> tuple[bool, tuple | None]:
    """Whether the arcs cover the whole circle; otherwise the largest gap as
    (center, length), the first one when several tie."""
    u = ArcUnion.of(arcs, exact)
    gaps = u.gaps()
    if not gaps:
        return True, None
    longest = max(g[1] for g in gaps)
    slack = 0 if exact else 1e-12
    start, length = next(g for g in sorted(gaps) if g[1] >= longest - slack)
    center = (start + length / 2) % 1
    return False, (center, length)


def cylinder_arcs(cylinders: Iterable[Cylinder], radius, both_orientations: bool = True) -> list[Arc]:
    """Arcs around cylinder directions; ``radius`` is a number or a function of the cylinder.

    Cylinders are unoriented; on the circle of flow directions each one sits
    at tau and tau + 1/2.
    """
    out = []
    for c in cylinders:
        r = radius(c) if callable(radius) else radius
        out.append(Arc(c.tau, r))
        if both_orientations:
            out.append(Arc((c.tau + 0.5) % 1.0, r))
    return out


def _covered_float(centers, widths, c) -> bool:
    ivs = []
    for x, w in zip(centers, widths):
        r = c * w
        if r >= 0.5:
            return True
        lo, hi = x - r, x + r
        if lo < 0:
            ivs += [(lo + 1, 1.0), (0.0, hi)]
        elif hi > 1:
            ivs += [(lo, 1.0), (0.0, hi - 1)]
        else:
            ivs.append((lo, hi))
    ivs.sort()
    reach = 0.0
    for lo, hi in ivs:
        if lo > reach:
            return False
        reach = max(reach, hi)
    return reach >= 1.0


def minimal_covering_constant(surface: TranslationSurface, L: float, tol: float = 1e-6,
                              cylinders: list[Cylinder] | None = None) -> float:
    """Smallest c (to ``tol``) with the arcs B(tau, c/(T*L)) covering the circle,
    over cylinders of area fraction >= sigma and length < L."""
    if cylinders is None:
        cylinders = cylinder_sequence(surface, L)
    cylinders = [c for c in cylinders if c.core_length < L]
    if not cylinders:
        raise NoCylinders(f"no cylinders shorter than {L}")
    centers, widths = [], []
    for c in cylinders:
        for tau in (c.tau, (c.tau + 0.5) % 1.0):
            centers.append(tau)
            widths.append(1.0 / (c.core_length * L))
    lo, hi = 0.0, 1.0
    while not _covered_float(centers, widths, hi):
        lo, hi = hi, 2 * hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _covered_float(centers, widths, mid):
            hi = mid
        else:
            lo = mid
    return hi


def key_bound_report(surface: TranslationSurface, N: float, J: tuple, C1: float,
                     cylinders: list[Cylinder] | None = None) -> dict:
    """Measure of the radius-1/(C1*N)^2 arcs around directions of cylinders with
    N <= T < C1*N, intersected with J."""
    _check_J(J)
    if N <= 0 or C1 <= 1:
        raise ValueError("need N > 0 and C1 > 1")
    big = C1 * N
    if cylinders is None:
        cylinders = cylinder_sequence(surface, big)
    annulus = [c for c in cylinders if N <= c.core_length < big]
    if not annulus:
        raise NoCylinders(f"no cylinders with length in [{N}, {big})")
    r = 1.0 / big ** 2
    a, b = J
    arcs = [arc for arc in cylinder_arcs(annulus, r) if _near(arc.center, a - r, b + r)]
    lam = Fraction(b) - Fraction(a)
    measured = union_measure(arcs, J) if arcs else Fraction(0)
    correction = 2.0 / big ** 2
    c2 = float((measured + Fraction(correction)) / lam) if lam > 0 else None
    return {
        "N": N,
        "C1": C1,
        "J": [float(a), float(b)],
        "annulus_count": len(annulus),
        "measured": float(measured),
        "correction": correction,
        "C2_candidate": c2,
    }


def _near(x, lo, hi) -> bool:
    # x on the circle within [lo, hi] (lo may be < 0, hi may exceed 1)
    return any(lo <= x + k <= hi for k in (-1, 0, 1))


def sum_bound_check(surface: TranslationSurface, L: float, J: tuple,
                    cylinders: list[Cylinder] | None = None) -> dict:
    """Union of B(tau, 1/(T*L)) over sigma-area cylinders of length < L,
    measured exactly inside J, against sigma^{-1} * lambda(J).

    Also reports the summed arc measure inside J (the multiplicity form of the
    same bound), which is not asserted.
    """
    _check_J(J)
    if cylinders is None:
        cylinders = cylinder_sequence(surface, L)
    cyls = [c for c in cylinders if c.core_length < L]
    arcs = cylinder_arcs(cyls, lambda c: 1.0 / (c.core_length * L))
    a, b = Fraction(J[0]), Fraction(J[1])
    measured = union_measure(arcs, (a, b)) if arcs else Fraction(0)
    inv_sigma = 1 / surface.sigma
    bound = inv_sigma * (b - a)
    summed = sum((ArcUnion.of([arc]).intersect_measure((a, b)) for arc in arcs), Fraction(0))
    return {
        "L": L,
        "J": [float(a), float(b)],
        "measured": float(measured),
        "bound": float(bound),
        "pass": measured <= bound,
        "summed": float(summed),
        "summed_pass": summed <= bound,
    }


def annulus_count(cylinders: Iterable[Cylinder], L: float, C5: float, J: tuple) -> int:
    """Number of (tau, T) with L <= T < C5*L and tau in J (J in unoriented units [0, 1/2))."""
    a, b = J
    return sum(1 for c in cylinders if L <= c.core_length < C5 * L and a <= c.tau < b)
