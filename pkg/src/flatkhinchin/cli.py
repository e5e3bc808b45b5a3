"""``flatkhinchin`` command line.

Exit status: 0 on success, 1 when a verification fails, 2 on bad input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .circle import (NoCylinders, covers_circle, cylinder_arcs, key_bound_report, minimal_covering_constant,
                     sum_bound_check)
from .cylinders import cylinder_sequence, enumerate_cylinders
from .experiments import (BadPerturbation, ExperimentConfig, _clean, run_iet_khinchin, run_khinchin_flow,
                          run_lemma_translation_check, verify_lemma_flow)
from .flow import FlowError, trace
from .iet import IETError, default_transversal, first_return_iet, parse_transversal, recurrence_scan
from .series import SeriesSpec, divergence_verdict, partial_sums
from .surface import BadParameter, Direction, SurfaceError, SurfacePoint, load_surface, vorobets_constant

log = logging.getLogger("flatkhinchin")


class _Out:
    def __init__(self, args):
        self.fmt = args.format
        self.path = args.out

    def write(self, text: str):
        if self.path:
            with open(self.path, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)

    def json(self, obj):
        self.write(json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n")

    def table(self, cols, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        w.writerows(_clean(rows))
        self.write(buf.getvalue())

    def emit(self, obj, cols=None, rows=None):
        if self.fmt == "csv" and cols is not None:
            self.table(cols, rows)
        else:
            self.json(obj)


def _point(text: str) -> SurfacePoint:
    try:
        p, x, y = text.split(",")
        return SurfacePoint.of(int(p), Fraction(x.strip()), Fraction(y.strip()))
    except ValueError:
        raise BadParameter(f"point must be poly,x,y, got {text!r}") from None


def _interval(text: str) -> tuple:
    try:
        a, b = text.split(",")
        return Fraction(a.strip()), Fraction(b.strip())
    except ValueError:
        raise BadParameter(f"interval must be a,b, got {text!r}") from None


def _dyadic(kmax: int):
    for k in range(kmax + 1):
        for i in range(2 ** k):
            yield Fraction(i, 2 ** k), Fraction(i + 1, 2 ** k)


# -- commands --------------------------------------------------------------------

def cmd_surface_info(args, out):
    s = load_surface(args.surface)
    info = s.info()
    info["vorobets_constant_log2"] = vorobets_constant(s).log2
    out.json(info)
    return 0


def cmd_flow_trace(args, out):
    s = load_surface(args.surface)
    events = trace(s, _point(args.x), Direction(args.tau), args.t, max_crossings=args.max_crossings)
    if out.fmt == "csv":
        out.table(["kind", "time", "polygon", "x", "y"],
                  [[e.kind.value, e.time, e.point.polygon, float(e.point.pos.x), float(e.point.pos.y)] for e in events])
    else:
        out.write("".join(json.dumps(e.to_json(), sort_keys=True) + "\n" for e in events))
    return 0


def cmd_cylinders_enumerate(args, out):
    s = load_surface(args.surface)
    cyls = sorted(enumerate_cylinders(s, args.length, args.min_area), key=lambda c: (c.core_length, c.tau))
    out.emit({"surface": args.surface, "L": args.length, "count": len(cyls), "cylinders": [c.to_json() for c in cyls]},
             ["tau", "T", "h", "area"], [[c.tau, c.core_length, c.height, c.area_fraction] for c in cyls])
    return 0


def cmd_iet_build(args, out):
    s = load_surface(args.surface)
    tr = parse_transversal(args.transversal) if args.transversal else default_transversal(s)
    iet = first_return_iet(s, Direction(args.tau), tr)
    doc = iet.to_json()
    doc["tiling_defect"] = iet.tiling_defect()
    out.emit(doc, ["start", "end", "translation"],
             [[a, b, v] for (a, b), v in zip(iet.pieces(), iet.translations)])
    return 0


def cmd_iet_scan(args, out):
    s = load_surface(args.surface)
    tr = parse_transversal(args.transversal) if args.transversal else default_transversal(s)
    seq = SeriesSpec.parse(args.seq)
    samples = []
    for i in range(args.samples):
        rng = np.random.default_rng([args.seed, i])
        tau = args.tau if args.tau is not None else float(rng.random())
        try:
            iet = first_return_iet(s, Direction(tau), tr, check_pairs=10)
            x = args.x if args.x is not None else float(rng.random() * iet.domain_length)
            res = recurrence_scan(iet, x, seq, args.N)
        except IETError as exc:
            log.warning("sample %d skipped: %s", i, exc)
            continue
        samples.append((i, tau, x, res))
    if out.fmt == "csv":
        out.table(["sample", "n", "distance", "a_n"],
                  [[i, n, d, a] for i, _, _, res in samples for n, d, a in res["hit_rows"]])
    else:
        out.json({"sequence": str(seq), "N": args.N, "samples": [
            {"sample": i, "tau": tau, "x": x, "hits": res["hits"], "min_ratio": res["min_ratio"],
             "tail_min_ratio": res["tail_min_ratio"], "hit_rows": res["hit_rows"]} for i, tau, x, res in samples]})
    return 0


def cmd_series_check(args, out):
    spec = SeriesSpec.parse(args.gen)
    v = divergence_verdict(spec)
    v["at_K"] = partial_sums(spec, args.K)
    out.json(v)
    return 0


def cmd_verify_lemma_flow(args, out):
    s = load_surface(args.surface)
    res = verify_lemma_flow(s, args.length, args.min_area)
    res["pass"] = not res["violations"]
    out.json(res)
    return 0 if res["pass"] else 1


def cmd_verify_covering(args, out):
    s = load_surface(args.surface)
    cyls = cylinder_sequence(s, args.length)
    c_emp = minimal_covering_constant(s, args.length, cylinders=cyls)
    vc = vorobets_constant(s)
    if args.constant is not None:
        arcs = cylinder_arcs([c for c in cyls if c.core_length < args.length],
                             lambda c: args.constant / (c.core_length * args.length))
        ok, gap = covers_circle(arcs, exact=False)
        res = {"measured": c_emp, "bound": args.constant, "pass": ok,
               "gap": None if gap is None else [float(gap[0]), float(gap[1])]}
    else:
        res = {"measured": c_emp, "bound": vc.as_float(), "bound_log2": vc.log2, "pass": vc.exceeds(c_emp)}
    res["L"] = args.length
    out.json(res)
    return 0 if res["pass"] else 1


def cmd_verify_sum_bound(args, out):
    s = load_surface(args.surface)
    cyls = cylinder_sequence(s, args.length)
    Js = [_interval(args.J)] if args.J else list(_dyadic(args.kmax))
    rows = [sum_bound_check(s, args.length, J, cylinders=cyls) for J in Js]
    worst = max(rows, key=lambda r: r["measured"] - r["bound"])
    res = {"L": args.length, "intervals": len(rows), "violations": [r for r in rows if not r["pass"]],
           "measured": worst["measured"], "bound": worst["bound"], "pass": all(r["pass"] for r in rows)}
    out.emit(res, ["a", "b", "measured", "bound", "pass"], [r["J"] + [r["measured"], r["bound"], r["pass"]] for r in rows])
    return 0 if res["pass"] else 1


def cmd_verify_key(args, out):
    s = load_surface(args.surface)
    res = key_bound_report(s, args.N, _interval(args.J), args.C1)
    res["pass"] = res["measured"] > 0 or res["J"][0] == res["J"][1]
    out.json(res)
    return 0 if res["pass"] else 1


def cmd_verify_translation(args, out):
    s = load_surface(args.surface)
    cyls = sorted(enumerate_cylinders(s, args.length, 1e-12), key=lambda c: (c.core_length, c.tau))[: args.count]
    if not cyls:
        raise NoCylinders(f"no cylinders shorter than {args.length}")
    rows = [run_lemma_translation_check(s, c, args.epsilon, args.samples, seed=args.seed + k)
            for k, c in enumerate(cyls)]
    res = {"cylinders": rows, "pass": all(r["pass"] for r in rows)}
    cols = ["tau", "T", "area_fraction", "fraction_close", "fraction_close_10eps", "required", "pass"]
    out.emit(res, cols, [[r[c] for c in cols] for r in rows])
    return 0 if res["pass"] else 1


def _config(args) -> ExperimentConfig:
    return ExperimentConfig(surface=args.surface, target=args.target, samples=args.samples, horizon=args.horizon,
                            seed=args.seed, grid_start=args.grid_start, grid_ratio=args.grid_ratio,
                            cylinder_length=args.cylinder_length, window=args.window,
                            transversal=getattr(args, "transversal", None))


def cmd_experiment(args, out):
    cfg = _config(args)
    run = run_khinchin_flow if args.which == "khinchin-flow" else run_iet_khinchin
    report = run(cfg, workers=args.threads)
    out.write(report.to_csv() if out.fmt == "csv" else report.to_json())
    return 0


# -- parser ----------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    # accepted both before and after the subcommand
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    p.add_argument("--format", choices=["json", "csv"], default=argparse.SUPPRESS)
    p.add_argument("--out", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    root = argparse.ArgumentParser(prog="flatkhinchin", description=__doc__.splitlines()[0], parents=[common])
    root.add_argument("--version", action="version", version=__version__)
    root.add_argument("-v", "--verbose", action="store_true")
    sub = root.add_subparsers(dest="group", required=True)

    def leaf(parent, name, fn, **kw):
        p = parent.add_parser(name, parents=[common], **kw)
        p.set_defaults(fn=fn)
        return p

    g = sub.add_parser("surface").add_subparsers(dest="cmd", required=True)
    p = leaf(g, "info", cmd_surface_info, help="genus, sigma, area and singularities")
    p.add_argument("surface")

    g = sub.add_parser("flow").add_subparsers(dest="cmd", required=True)
    p = leaf(g, "trace", cmd_flow_trace, help="edge crossings of one trajectory")
    p.add_argument("--surface", required=True)
    p.add_argument("--x", required=True, help="poly,x,y")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--max-crossings", type=int, default=None)

    g = sub.add_parser("cylinders").add_subparsers(dest="cmd", required=True)
    p = leaf(g, "enumerate", cmd_cylinders_enumerate)
    p.add_argument("--surface", required=True)
    p.add_argument("--length", type=float, required=True)
    p.add_argument("--min-area", type=float, default=1e-12)

    g = sub.add_parser("iet").add_subparsers(dest="cmd", required=True)
    p = leaf(g, "build", cmd_iet_build, help="first-return map to a transversal")
    p.add_argument("--surface", required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--transversal", help="poly,x,y,tau,length")
    p = leaf(g, "scan", cmd_iet_scan, help="recurrence hits |T^n x - x| < a_n")
    p.add_argument("--surface", default="builtin:square_torus")
    p.add_argument("--transversal")
    p.add_argument("--seq", default="harmonic:1")
    p.add_argument("--N", type=int, default=100_000)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--tau", type=float, help="fixed direction (default: sampled)")
    p.add_argument("--x", type=float, help="fixed start (default: sampled)")

    g = sub.add_parser("series").add_subparsers(dest="cmd", required=True)
    p = leaf(g, "check", cmd_series_check, help="empirical verdicts and partial sums")
    p.add_argument("--gen", required=True)
    p.add_argument("--K", type=int, default=1_000_000)

    g = sub.add_parser("verify").add_subparsers(dest="cmd", required=True)
    p = leaf(g, "lemma-flow", cmd_verify_lemma_flow, help="crossing-length bound for intersecting cylinders")
    p.add_argument("--surface", required=True)
    p.add_argument("--length", type=float, default=20.0)
    p.add_argument("--min-area", type=float, default=1e-12)
    p = leaf(g, "covering", cmd_verify_covering, help="arcs c/(TL) around cylinder directions cover the circle")
    p.add_argument("--surface", required=True)
    p.add_argument("--length", type=float, required=True)
    p.add_argument("--constant", type=float)
    p = leaf(g, "sum-bound", cmd_verify_sum_bound, help="union of arcs 1/(TL) inside J against lambda(J)/sigma")
    p.add_argument("--surface", required=True)
    p.add_argument("--length", type=float, required=True)
    p.add_argument("--J", help="a,b (default: all dyadic intervals up to --kmax)")
    p.add_argument("--kmax", type=int, default=6)
    p = leaf(g, "key", cmd_verify_key, help="arc measure for cylinders with N <= T < C1 N")
    p.add_argument("--surface", required=True)
    p.add_argument("--N", type=float, required=True)
    p.add_argument("--C1", type=float, default=2.0)
    p.add_argument("--J", default="0,1")
    p = leaf(g, "translation", cmd_verify_translation, help="displacement after one trip at a nearby angle")
    p.add_argument("--surface", required=True)
    p.add_argument("--length", type=float, default=6.0, help="enumerate cylinders shorter than this")
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--samples", type=int, default=10_000)

    g = sub.add_parser("experiment").add_subparsers(dest="which", required=True)
    for name, target, horizon in (("khinchin-flow", "harmonic:1", 1e4), ("iet-recurrence", "harmonic:1", 1e5)):
        p = leaf(g, name, cmd_experiment)
        p.add_argument("--surface", default="builtin:square_torus")
        p.add_argument("--target", default=target, help="f(t) or a_n, e.g. harmonic:1, power:1,2")
        p.add_argument("--samples", type=int, default=100)
        p.add_argument("--horizon", type=float, default=horizon)
        p.add_argument("--grid-start", type=float, default=1.0)
        p.add_argument("--grid-ratio", type=float, default=1.25)
        p.add_argument("--cylinder-length", type=float, default=20.0)
        p.add_argument("--window", type=float, default=0.1)
        if name == "iet-recurrence":
            p.add_argument("--transversal")
    return root


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    for k, v in (("seed", 0), ("threads", 1), ("format", "json"), ("out", None)):
        if not hasattr(args, k):
            setattr(args, k, v)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args, _Out(args))
    except (SurfaceError, BadParameter, BadPerturbation, NoCylinders, IETError, FlowError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
