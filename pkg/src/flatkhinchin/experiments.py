"""Seeded sampling experiments with reproducible JSON/CSV reports.

Per-sample randomness comes from ``np.random.default_rng([seed, index])`` so
results do not depend on how samples are spread over worker threads; the
reduction is always in sample order.
"""
from __future__ import annotations

import csv
import io
import json
import math
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels as K
from .cylinders import Cylinder, _move, enumerate_cylinders, separation_check
from .flow import distance
from .iet import (HitBreakpoint, IETError, first_return_iet, default_transversal, parse_transversal,
                  recurrence_scan)
from .series import SeriesSpec, divergence_verdict
from .surface import SurfacePoint, TranslationSurface, Vec2, load_surface

__all__ = [
    "SCHEMA_VERSION",
    "BadPerturbation",
    "ExperimentConfig",
    "Report",
    "sample_point",
    "run_khinchin_flow",
    "run_iet_khinchin",
    "run_lemma_translation_check",
    "verify_lemma_flow",
]

SCHEMA_VERSION = 1


class BadPerturbation(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a report; the worker count is deliberately not here."""

    surface: str = "builtin:square_torus"
    target: str = "harmonic:1"  # f(t) for flows, a_n for IETs
    samples: int = 100
    horizon: float = 10_000.0  # t_max for flows, N for IETs
    seed: int = 0
    grid_start: float = 1.0
    grid_ratio: float = 1.25
    cylinder_length: float = 20.0
    window: float = 0.1  # a hit counts as late when t >= window * horizon
    transversal: str | None = None
    max_redraws: int = 20
    iet_check_pairs: int = 10

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not self.grid_ratio > 1 or not self.grid_start > 0:
            raise ValueError("grid needs start > 0 and ratio > 1")
        if not 0 < self.window <= 1:
            raise ValueError("window must be in (0, 1]")
        SeriesSpec.parse(self.target)


def _environment() -> dict:
    import numba

    from . import __version__

    return {"flatkhinchin": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "numba": numba.__version__}


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.generic):
        return _clean(v.item())
    return v


@dataclass
class Report:
    kind: str
    config: dict
    records: list[dict]
    aggregate: dict
    log: list[str] = field(default_factory=list)
    environment: dict = field(default_factory=_environment)

    def to_dict(self) -> dict:
        return _clean({"schema_version": SCHEMA_VERSION, "kind": self.kind, "config": self.config,
                       "records": self.records, "aggregate": self.aggregate, "log": self.log,
                       "environment": self.environment})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        if not self.records:
            return ""
        cols = [k for k in self.records[0] if not isinstance(self.records[0][k], (list, dict))]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index"] + cols)
        for i, r in enumerate(_clean(self.records)):
            w.writerow([i] + [r.get(c) for c in cols])
        return buf.getvalue()


def sample_point(surface: TranslationSurface, rng: np.random.Generator) -> tuple[int, float, float]:
    """Uniform point as (triangle, x, y)."""
    w = np.abs(surface.tri_area)
    t = int(rng.choice(len(w), p=w / w.sum()))
    u, v = rng.random(2)
    if u + v > 1:
        u, v = 1 - u, 1 - v
    a = surface.tri_xy[t]
    p = a[0] + u * (a[1] - a[0]) + v * (a[2] - a[0])
    return t, float(p[0]), float(p[1])


def _map(fn, n: int, workers: int) -> list:
    if workers <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(n)))


# -- Khinchin recurrence for the flow ---------------------------------------------

def _probe_times(surface, cfg: ExperimentConfig, f: SeriesSpec, tau: float, cylinders, chain_data, x_poly, x0):
    H = cfg.horizon
    d = (math.cos(2 * math.pi * tau), math.sin(2 * math.pi * tau))
    times = set()
    k = 0
    while True:
        t = cfg.grid_start * cfg.grid_ratio ** k
        if t > H:
            break
        times.add(t)
        k += 1
    # near-parallel cylinders: one trip around the core
    for c in cylinders:
        delta = (tau - c.tau + 0.25) % 0.5 - 0.25
        cs = abs(math.cos(2 * math.pi * delta))
        if cs == 0:
            continue
        t = c.core_length / cs
        if cfg.grid_start <= t <= H and c.core_length * abs(math.tan(2 * math.pi * delta)) < f(t):
            times.add(t)
    # closest approach to developed copies of x seen along the path
    n, tris, ox, oy = chain_data
    m = surface.tri_poly[tris[:n]] == x_poly
    offs = np.unique(np.round(np.stack([ox[:n][m], oy[:n][m]], axis=1), 12), axis=0)
    if len(offs):
        wx, wy = offs[:, 0], offs[:, 1]  # developed copy minus start is exactly the offset
        ts = wx * d[0] + wy * d[1]
        perp = np.abs(d[0] * wy - d[1] * wx)
        ok = (ts >= cfg.grid_start) & (ts <= H)
        ts, perp = ts[ok], perp[ok]
        good = perp < np.asarray(f(ts))
        times.update(float(t) for t in ts[good])
    return sorted(times)


def _khinchin_sample(surface, cfg, f, cylinders, i):
    rng = np.random.default_rng([cfg.seed, i])
    tau = float(rng.random())
    tri, x, y = sample_point(surface, rng)
    rec = {"tau": tau, "polygon": int(surface.tri_poly[tri]), "x": x, "y": y}
    d = (math.cos(2 * math.pi * tau), math.sin(2 * math.pi * tau))
    steps = int(40 * cfg.horizon / surface.shortest_edge) + 1000
    st, n, tris, ex, ey, t0, sl, _, ox, oy, _ = K.chain(
        surface.tri_xy, surface.tri_nbr, surface.tri_shift, surface.tri_sing,
        tri, x, y, d[0], d[1], float(cfg.horizon), surface.eps_sing, steps)
    if st != K.OK:
        rec.update(status="singular" if st == K.SINGULAR else "step_limit", hits=0, late_hit=False,
                   first_hit_time=None, last_hit_time=None, min_ratio=None, probes=0)
        return rec
    me = SurfacePoint(rec["polygon"], Vec2(x, y))
    probes = _probe_times(surface, cfg, f, tau, cylinders, (n, tris, ox, oy), rec["polygon"], (x, y))
    hits = []
    best = math.inf
    for t in probes:
        j = int(np.searchsorted(t0[:n], t, side="right") - 1)
        s = t - t0[j]
        pt = SurfacePoint(int(surface.tri_poly[tris[j]]), Vec2(float(ex[j] + d[0] * s), float(ey[j] + d[1] * s)))
        ft = f(t)
        dist = distance(surface, pt, me, r_max=ft)
        if dist < ft:
            hits.append(t)
            best = min(best, dist / ft)
    late = [t for t in hits if t >= cfg.window * cfg.horizon]
    rec.update(status="ok", probes=len(probes), hits=len(hits), late_hit=bool(late),
               first_hit_time=hits[0] if hits else None, last_hit_time=hits[-1] if hits else None,
               min_ratio=best if hits else None)
    return rec


def run_khinchin_flow(cfg: ExperimentConfig, workers: int = 1) -> Report:
    """Sample (theta, x) and look for times t with d(F^t x, x) < f(t).

    Probe times: a geometric grid, one trip around each nearly parallel
    cylinder (T * |sec| of the angle difference), and the closest approach
    to each developed copy of x the orbit passes. A sample succeeds if a hit
    occurs at t >= window * horizon.
    """
    surface = load_surface(cfg.surface)
    f = SeriesSpec.parse(cfg.target)
    cylinders = enumerate_cylinders(surface, cfg.cylinder_length, 1e-12) if cfg.cylinder_length > 0 else []
    records = _map(lambda i: _khinchin_sample(surface, cfg, f, cylinders, i), cfg.samples, workers)
    ok = [r for r in records if r["status"] == "ok"]
    firsts = [r["first_hit_time"] for r in ok if r["first_hit_time"] is not None]
    agg = {
        "samples": len(records),
        "failed": len(records) - len(ok),
        "hit_fraction": sum(r["late_hit"] for r in ok) / len(ok) if ok else None,
        "any_hit_fraction": sum(r["hits"] > 0 for r in ok) / len(ok) if ok else None,
        "median_first_hit_time": float(np.median(firsts)) if firsts else None,
    }
    return Report("khinchin-flow", asdict(cfg), records, agg)


# -- recurrence for first-return maps ----------------------------------------------

def _iet_sample(surface, cfg, seq, tr, i):
    rng = np.random.default_rng([cfg.seed, i])
    log = []
    N = int(cfg.horizon)
    for attempt in range(cfg.max_redraws + 1):
        tau = float(rng.random())
        try:
            iet = first_return_iet(surface, tau, tr, check_pairs=cfg.iet_check_pairs)
            x = float(rng.random() * iet.domain_length)
            res = recurrence_scan(iet, x, seq, N)
        except (IETError, HitBreakpoint) as exc:
            log.append(f"sample {i}: redraw after {type(exc).__name__} at tau={tau:.12g}")
            continue
        hits = res["hits"]
        return {"tau": tau, "x": x, "pieces": iet.n_pieces, "hits": len(hits),
                "late_hit": any(n >= cfg.window * N for n in hits),
                "last_hit": hits[-1] if hits else None, "min_ratio": res["min_ratio"],
                "tail_min_ratio": res["tail_min_ratio"], "redraws": attempt, "status": "ok"}, log
    return {"tau": None, "x": None, "pieces": None, "hits": 0, "late_hit": False, "last_hit": None,
            "min_ratio": None, "tail_min_ratio": None, "redraws": cfg.max_redraws, "status": "failed"}, log


def run_iet_khinchin(cfg: ExperimentConfig, workers: int = 1) -> Report:
    """Sample directions, build first-return maps and scan |T^n x - x| < a_n for n <= horizon.

    ``hypothesis_violated`` is set when sum a_n looks convergent, in which
    case infinitely many hits are not expected.
    """
    surface = load_surface(cfg.surface)
    seq = SeriesSpec.parse(cfg.target)
    tr = parse_transversal(cfg.transversal) if cfg.transversal else default_transversal(surface)
    out = _map(lambda i: _iet_sample(surface, cfg, seq, tr, i), cfg.samples, workers)
    records = [r for r, _ in out]
    log = [line for _, lines in out for line in lines]
    ok = [r for r in records if r["status"] == "ok"]
    verdict = divergence_verdict(seq)["verdicts"]["sum_a"] if seq.kind != "list" else "inconclusive"
    agg = {
        "samples": len(records),
        "failed": len(records) - len(ok),
        "median_hits": float(np.median([r["hits"] for r in ok])) if ok else None,
        "fraction_min_ratio_below_1": sum(r["min_ratio"] < 1 for r in ok) / len(ok) if ok else None,
        "hit_fraction": sum(r["late_hit"] for r in ok) / len(ok) if ok else None,
        "sum_a_verdict": verdict,
        "hypothesis_violated": verdict == "converges_empirically",
    }
    return Report("iet-recurrence", asdict(cfg), records, agg, log=log)


# -- translation near a cylinder direction ---------------------------------------

def run_lemma_translation_check(surface: TranslationSurface, cylinder: Cylinder, epsilon: float,
                                samples: int = 10_000, seed: int = 0) -> dict:
    """Flow points of ``cylinder`` in direction tau + epsilon/T for time T*|sec|.

    Points start uniformly in cylinder coordinates. Reports the fractions
    displaced by less than 2*epsilon and 10*epsilon together with the
    predicted displacement T*tan(2*pi*epsilon/T), about 2*pi*epsilon.
    """
    T, h = cylinder.core_length, cylinder.height
    if epsilon <= 0 or epsilon >= h / 2:
        raise BadPerturbation(f"epsilon must be in (0, h/2) with h = {h}")
    if epsilon / T >= 0.25:
        raise BadPerturbation("perturbation of a quarter turn or more")
    dtau = epsilon / T
    phi = cylinder.tau + dtau
    t = T / math.cos(2 * math.pi * dtau)
    u = cylinder._unit
    nrm = (-u[1], u[0])
    rng = np.random.default_rng(seed)
    along = rng.random(samples) * T
    across = (rng.random(samples) - 0.5) * h
    dx, dy = math.cos(2 * math.pi * phi), math.sin(2 * math.pi * phi)
    steps = int(40 * t / surface.shortest_edge) + 1000
    r_max = 10 * epsilon
    disp = np.full(samples, math.inf)
    for k in range(samples):
        v = (along[k] * u[0] + across[k] * nrm[0], along[k] * u[1] + across[k] * nrm[1])
        loc = _move(surface, cylinder._loc, *v)
        if loc is None:
            continue
        st, tri, px, py, *_ = K.advance(surface.tri_xy, surface.tri_nbr, surface.tri_shift, surface.tri_sing,
                                        loc[0], loc[1], loc[2], dx, dy, t, surface.eps_sing, steps)
        if st != K.OK:
            continue
        a = SurfacePoint(int(surface.tri_poly[loc[0]]), Vec2(float(loc[1]), float(loc[2])))
        b = SurfacePoint(int(surface.tri_poly[tri]), Vec2(float(px), float(py)))
        disp[k] = distance(surface, b, a, r_max=r_max)
    p10 = float(np.mean(disp < 10 * epsilon))
    need = 0.25 * cylinder.area_fraction
    sigma = math.sqrt(max(need * (1 - need), 1e-12) / samples)
    finite = disp[np.isfinite(disp)]
    return {
        "tau": cylinder.tau, "T": T, "h": h, "area_fraction": cylinder.area_fraction,
        "epsilon": epsilon, "phi": phi % 1.0, "time": t, "samples": samples,
        "fraction_close": float(np.mean(disp < 2 * epsilon)),
        "fraction_close_10eps": p10,
        "predicted_displacement": T * math.tan(2 * math.pi * dtau),
        "median_displacement": float(np.median(finite)) if len(finite) else None,
        "required": need, "binomial_sigma": sigma,
        "pass": p10 >= need - 2 * sigma,
    }


def verify_lemma_flow(surface: TranslationSurface, L_max: float, min_area: float = 1e-12,
                      cylinders: list[Cylinder] | None = None) -> dict:
    """Crossing-length bound for every pair of intersecting cylinders shorter than L_max."""
    if cylinders is None:
        cylinders = enumerate_cylinders(surface, L_max, min_area)
    res = separation_check(cylinders)
    res["cylinders"] = len(cylinders)
    res["L_max"] = L_max
    return res
