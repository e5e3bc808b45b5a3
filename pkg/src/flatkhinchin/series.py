"""Positive non-increasing sequences and the partial sums used to compare
``sum i*a_i`` with ``sum a_floor(sqrt i)``.

Verdicts on divergence are empirical: they compare partial-sum increments
over decades and never claim to decide convergence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "SeriesSpec",
    "Verdict",
    "VerdictThresholds",
    "partial_sums",
    "sandwich_table",
    "sum_floor_sqrt",
    "divergence_verdict",
    "BATTERY",
    "battery",
]

_KINDS = ("harmonic", "power", "log", "powerlog", "const", "list")


@dataclass(frozen=True)
class SeriesSpec:
    """A sequence ``a_n`` (n >= 1), also usable as a function of real t.

    kinds: ``harmonic`` c/n, ``power`` c/n^p, ``log`` c/(n ln(n)^q),
    ``powerlog`` c/(n^p ln(n)^q), ``const`` c, ``list`` explicit values
    a_1, a_2, ... The log kinds are evaluated at max(n, 3) so that they are
    finite and non-increasing from the first term.
    """

    kind: str
    c: float = 1.0
    p: float = 1.0
    q: float = 1.0
    values: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        if self.kind == "list":
            if not self.values or any(v <= 0 for v in self.values):
                raise ValueError("explicit list must be non-empty and positive")
        elif self.c <= 0:
            raise ValueError("c must be positive")
        if self.kind == "power" and self.p < 0:
            raise ValueError("power exponent must be >= 0")
        if self.kind in ("log", "powerlog") and self.q < 0:
            raise ValueError("log exponent must be >= 0")

    @classmethod
    def parse(cls, text: str) -> "SeriesSpec":
        """``harmonic:c``, ``power:c,p``, ``log:c,q``, ``powerlog:c,p,q``, ``const:c``
        or ``list:a1,a2,...``."""
        kind, _, rest = text.strip().partition(":")
        kind = kind.strip()
        try:
            nums = [float(v) for v in rest.split(",") if v.strip()] if rest else []
        except ValueError:
            raise ValueError(f"cannot parse sequence {text!r}") from None
        if kind == "harmonic" or kind == "const":
            return cls(kind, c=nums[0] if nums else 1.0)
        if kind == "power":
            if len(nums) != 2:
                raise ValueError("power needs c,p")
            return cls(kind, c=nums[0], p=nums[1])
        if kind == "log":
            if len(nums) != 2:
                raise ValueError("log needs c,q")
            return cls(kind, c=nums[0], q=nums[1])
        if kind == "powerlog":
            if len(nums) != 3:
                raise ValueError("powerlog needs c,p,q")
            return cls(kind, c=nums[0], p=nums[1], q=nums[2])
        if kind == "list":
            return cls(kind, values=tuple(nums))
        raise ValueError(f"unknown sequence kind {kind!r}")

    def __str__(self) -> str:
        if self.kind in ("harmonic", "const"):
            return f"{self.kind}:{self.c:g}"
        if self.kind == "power":
            return f"power:{self.c:g},{self.p:g}"
        if self.kind == "log":
            return f"log:{self.c:g},{self.q:g}"
        if self.kind == "powerlog":
            return f"powerlog:{self.c:g},{self.p:g},{self.q:g}"
        return "list:" + ",".join(f"{v:g}" for v in self.values)

    @property
    def max_index(self) -> float:
        return len(self.values) if self.kind == "list" else math.inf

    def __call__(self, t):
        """Value at real t > 0 (scalar or array); the list kind needs integer t."""
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "harmonic":
            out = self.c / t
        elif self.kind == "power":
            out = self.c / t ** self.p
        elif self.kind == "log":
            tt = np.maximum(t, 3.0)
            out = self.c / (tt * np.log(tt) ** self.q)
        elif self.kind == "powerlog":
            tt = np.maximum(t, 3.0)
            out = self.c / (tt ** self.p * np.log(tt) ** self.q)
        elif self.kind == "const":
            out = np.full_like(t, self.c)
        else:
            idx = t.astype(np.int64)
            if np.any(idx < 1) or np.any(idx > len(self.values)):
                raise IndexError("index outside the explicit list")
            out = np.asarray(self.values)[idx - 1]
        return float(out) if out.ndim == 0 else out

    def terms(self, n: int) -> np.ndarray:
        """a_1..a_n as an array (index 0 holds a_1)."""
        return np.asarray(self(np.arange(1, n + 1, dtype=np.float64)))

    def validate(self, n: int = 1_000_000) -> bool:
        a = self.terms(int(min(n, self.max_index)))
        return bool(np.all(a > 0) and np.all(np.diff(a) <= 0))


def sum_floor_sqrt(a: np.ndarray, J: int) -> float:
    """sum_{j=1..J} a_{floor(sqrt j)} given a[0] = a_1; block n has 2n+1 terms."""
    m = math.isqrt(J)
    n = np.arange(1, m, dtype=np.float64)
    return float(math.fsum((2 * n + 1) * a[: m - 1]) + (J - m * m + 1) * a[m - 1])


def _kmax(K: int) -> int:
    return K.bit_length() - 1  # floor(log2 K)


def sandwich_table(spec: SeriesSpec, K: int) -> list[dict]:
    """Dyadic sandwich at every truncation m = 1..floor(log2 K).

    lower_m = sum_{i=1..m} 4^(i-1) a_{2^i}, upper_m = sum_{i=0..m} 4^(i+1) a_{2^i}.
    For non-increasing a these satisfy
        lower_m <= S1(2^m),     S1(2^(m+1) - 1) <= upper_m,
        lower_m <= S2(4^m - 1), S2(4^(m+1) - 1) <= upper_m
    with S1(n) = sum_{i<=n} i*a_i and S2(n) = sum_{j<=n} a_{floor(sqrt j)}.
    """
    if K < 4:
        raise ValueError("K must be >= 4")
    mmax = _kmax(K)
    n_needed = 2 ** (mmax + 1)
    if n_needed > spec.max_index:
        raise ValueError("explicit list too short for this K")
    a = spec.terms(n_needed)
    ia = np.arange(1, n_needed + 1) * a
    S1 = np.cumsum(ia)
    rows = []
    lower = 0.0
    upper = 4.0 * a[0]  # i = 0 term: 4 * a_1
    for m in range(1, mmax + 1):
        lower += 4.0 ** (m - 1) * a[2 ** m - 1]
        upper += 4.0 ** (m + 1) * a[2 ** m - 1]
        s1_lo = float(S1[2 ** m - 1])
        s1_hi = float(S1[2 ** (m + 1) - 2])
        s2_lo = sum_floor_sqrt(a, 4 ** m - 1)
        s2_hi = sum_floor_sqrt(a, 4 ** (m + 1) - 1)
        rows.append({
            "m": m,
            "lower": lower,
            "upper": upper,
            "S1_at_2^m": s1_lo,
            "S1_at_2^(m+1)-1": s1_hi,
            "S2_at_4^m-1": s2_lo,
            "S2_at_4^(m+1)-1": s2_hi,
            "holds": lower <= s1_lo and s1_hi <= upper and lower <= s2_lo and s2_hi <= upper,
        })
    return rows


def partial_sums(spec: SeriesSpec, K: int) -> dict:
    """sum_{i<=K} i*a_i, sum_{i<=K} a_floor(sqrt i) and the dyadic sandwich truncated at 2^m <= K."""
    if K < 4:
        raise ValueError("K must be >= 4")
    if K > spec.max_index:
        raise ValueError("explicit list too short for this K")
    a = spec.terms(K)
    s1 = float(np.sum(np.arange(1, K + 1) * a))
    s2 = sum_floor_sqrt(a, K)
    table = sandwich_table(spec, K) if 2 ** (_kmax(K) + 1) <= spec.max_index else []
    last = table[-1] if table else {"lower": None, "upper": None}
    return {
        "K": K,
        "sum_i_ai": s1,
        "sum_a_floor_sqrt": s2,
        "sandwich": (last["lower"], last["upper"]),
        "sandwich_holds": all(r["holds"] for r in table),
    }


class Verdict(str, Enum):
    DIVERGES = "diverges_empirically"
    CONVERGES = "converges_empirically"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class VerdictThresholds:
    """Decade increments above ``increment`` that do not shrink below ``ratio``
    times the previous one read as divergence; increments below ``increment``
    that shrink read as convergence."""

    increment: float = 0.05
    ratio: float = 0.5
    decades: tuple[int, ...] = (10_000, 100_000, 1_000_000)


def _verdict(values: list[float], th: VerdictThresholds) -> Verdict:
    inc = [b - a for a, b in zip(values, values[1:])]
    if all(d > th.increment for d in inc) and all(b >= th.ratio * a for a, b in zip(inc, inc[1:])):
        return Verdict.DIVERGES
    if inc[-1] < th.increment and all(b <= a for a, b in zip(inc, inc[1:])):
        return Verdict.CONVERGES
    return Verdict.INCONCLUSIVE


def divergence_verdict(spec: SeriesSpec, thresholds: VerdictThresholds | None = None) -> dict:
    """Empirical verdicts for sum a_i, sum i*a_i and sum a_floor(sqrt i).

    The square-root series is compared at K^2 for each decade K, the point
    at which its terms reach index K.
    """
    th = thresholds or VerdictThresholds()
    Ks = list(th.decades)
    if len(Ks) < 2:
        raise ValueError("need at least two decades")
    a = spec.terms(max(Ks))
    cs_a = np.cumsum(a)
    cs_ia = np.cumsum(np.arange(1, len(a) + 1) * a)
    sums = {
        "sum_a": [float(cs_a[K - 1]) for K in Ks],
        "sum_i_ai": [float(cs_ia[K - 1]) for K in Ks],
        "sum_a_floor_sqrt": [sum_floor_sqrt(a, K * K) for K in Ks],
    }
    return {
        "sequence": str(spec),
        "label": "empirical",
        "K": Ks,
        "partial_sums": sums,
        "verdicts": {k: _verdict(v, th).value for k, v in sums.items()},
    }


# four divergent and four convergent under the i*a_i test
BATTERY: dict[str, tuple[SeriesSpec, bool]] = {
    "1/i": (SeriesSpec("harmonic"), True),
    "1/i^1.5": (SeriesSpec("power", p=1.5), True),
    "1/i^2": (SeriesSpec("power", p=2.0), True),
    "1/(i^2 ln i)": (SeriesSpec("powerlog", p=2.0, q=1.0), True),
    "1/i^2.5": (SeriesSpec("power", p=2.5), False),
    "1/i^3": (SeriesSpec("power", p=3.0), False),
    "1/i^4": (SeriesSpec("power", p=4.0), False),
    "1/(i^2 ln^2 i)": (SeriesSpec("powerlog", p=2.0, q=2.0), False),
}


def battery(K: int = 2 ** 12, thresholds: VerdictThresholds | None = None) -> list[dict]:
    """Sandwich and verdicts for every sequence in :data:`BATTERY`."""
    out = []
    for name, (spec, divergent) in BATTERY.items():
        v = divergence_verdict(spec, thresholds)
        out.append({
            "name": name,
            "sequence": str(spec),
            "expected_i_ai": "diverges" if divergent else "converges",
            "sandwich_holds": all(r["holds"] for r in sandwich_table(spec, K)),
            "verdicts": v["verdicts"],
        })
    return out
