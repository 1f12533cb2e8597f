"""Command-line experiment harness.

    vanetsci analyze urban-degree --densities 10,60,80 --area 4
    vanetsci analyze highway-clustering --lengths 5..35 --density 44.9
    vanetsci simulate uvcast --densities 20,60,100 --runs 10
    vanetsci oracle --mc-samples 1e6

Every command writes CSV files to ``--out`` and prints one ``CHECK`` line per
declared tolerance.  The exit status is 1 iff one of them fails, 2 on usage
or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analytic
from .exceptions import VanetError
from .fitting import FitResult, classify_topology, fit_gaussian, fit_log, fit_power, fit_powerlaw
from .graph import RangeModel, build_graph
from .metrics import MetricReport, degree_distribution, metric_report
from .scenario import HighwayConfig, UrbanConfig, generate, read_key_values
from .sim import MECHANISMS, SimConfig, resolve_mechanism, run_simulation, write_results, write_trace

log = logging.getLogger("vanetsci")

PRESETS = tuple(f"{s}-{m}" for s in ("urban", "highway")
                for m in ("degree", "aspl", "clustering", "connectivity"))

# per preset: default densities and default scales (km^2 or km)
DEFAULT_SWEEPS = {
    "urban-degree": ([10, 60, 80], [4.0]),
    "urban-aspl": ([10, 60, 80], [0.25, 0.5, 1, 2, 4, 9, 16]),
    "urban-clustering": ([10, 60, 80], [1, 2, 3, 4]),
    "urban-connectivity": (list(range(10, 101, 10)), [4.0]),
    "highway-degree": ([3.9, 26.0, 44.9], [20.0]),
    "highway-aspl": ([3.9, 26.0, 44.9], [5, 10, 15, 20, 25, 30, 35]),
    "highway-clustering": ([3.9, 26.0, 44.9], [5, 10, 15, 20, 25, 30, 35]),
    "highway-connectivity": ([3.9, 26.0, 44.9], [25.0]),
}

THEORY_CLUSTERING = {"urban": None, "highway": analytic.clustering_1d()}
DEGREE_R2_FLOOR = 0.97
HIGHWAY_CLUSTERING_BAND = (0.70, 0.80)
SIM_TX_REDUCTION = 0.15
SIM_CHECK_DENSITY = 100.0


# -- argument helpers -------------------------------------------------------------

def parse_sweep(text, default_step=1.0):
    """Parse ``"10,60,80"``, ``"10..100"`` or ``"10..100:5"`` (ranges are inclusive)."""
    values = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            span, _, step = part.partition(":")
            lo, hi = (float(v) for v in span.split(".."))
            step = float(step) if step else default_step
            if step <= 0 or hi < lo:
                raise argparse.ArgumentTypeError(f"bad range {part!r}")
            count = int(math.floor((hi - lo) / step + 1e-9)) + 1
            values += [lo + i * step for i in range(count)]
        else:
            values.append(float(part))
    if not values:
        raise argparse.ArgumentTypeError("empty sweep")
    return values


def _sweep(step):
    return lambda text: parse_sweep(text, step)


def _count(text):
    value = int(float(text))  # accepts "1e6"
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="vanetsci", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="base seed (run i uses seed + i)")
        p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
        p.add_argument("--config", type=Path, help="key=value file; command-line flags win")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweep points")

    a = sub.add_parser("analyze", help="graph metrics and fits over a scenario sweep")
    a.add_argument("preset", choices=PRESETS)
    common(a)
    a.add_argument("--densities", type=_sweep(10.0),
                   help="veh/km^2 (urban) or veh/km (highway); list or a..b[:step]")
    a.add_argument("--density", type=float, help="single density")
    a.add_argument("--area", "--areas", dest="scales_area", type=_sweep(1.0),
                   help="urban areas in km^2")
    a.add_argument("--length", "--lengths", dest="scales_length", type=_sweep(5.0),
                   help="highway lengths in km")
    a.add_argument("--runs", type=int, default=10, help="snapshots (seeds) per sweep point")
    a.add_argument("--placement", default="uniform_on_streets",
                   choices=("uniform_on_streets", "ca_warmed"))
    a.set_defaults(handler=cmd_analyze)

    s = sub.add_parser("simulate", help="UV-CAST broadcast simulation sweep")
    s.add_argument("preset", choices=("uvcast",))
    common(s)
    s.add_argument("--densities", type=_sweep(20.0), default=[20.0, 40.0, 60.0, 80.0, 100.0])
    s.add_argument("--runs", type=int, default=10)
    s.add_argument("--mechanism", action="append",
                   choices=sorted(set(MECHANISMS) | {"p", "s", "ps", "oracle"}),
                   help="repeatable; default is every mechanism")
    s.add_argument("--warmup", type=float, default=900.0, help="seconds")
    s.add_argument("--collect", type=float, default=120.0, help="seconds")
    s.add_argument("--trace", action="store_true", help="write the event trace of run 0")
    s.set_defaults(handler=cmd_simulate)

    o = sub.add_parser("oracle", help="analytic clustering values with Monte-Carlo cross-check")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--config", type=Path)
    o.add_argument("--mc-samples", type=_count, default=1_000_000,
                   help="0 skips the Monte-Carlo check")
    o.set_defaults(handler=cmd_oracle)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        values = read_key_values(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        dests = {act.dest for act in sub._actions}
        unknown = sorted(set(k.replace("-", "_") for k in values) - dests)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        # string defaults go through each action's type conversion
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in values.items()})
        args = parser.parse_args(argv)
    return args


class Checks:
    def __init__(self):
        self.failed = 0

    def __call__(self, ok, label):
        print(f"CHECK {'PASS' if ok else 'FAIL'} {label}")
        self.failed += not ok
        return ok


# -- analyze ----------------------------------------------------------------------

def _scenario_config(scenario, density, scale, placement):
    if scenario == "urban":
        return UrbanConfig(scale, density, placement_mode=placement)
    return HighwayConfig(scale, density)


def _analyze_point(job):
    scenario, density, scale, seed, placement = job
    snap = generate(_scenario_config(scenario, density, scale, placement), seed)
    graph = build_graph(snap, RangeModel())
    report = metric_report(graph, scale, scenario, density, seed)
    hist = degree_distribution(graph).counts if graph.n else {}
    return report, hist


def _map(fn, jobs, workers):
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(fn, jobs, chunksize=4))
    return [fn(j) for j in jobs]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def _num(v):
    return repr(float(v))


def _mean(values):
    arr = np.asarray(values, dtype=float)
    return float(np.nanmean(arr)) if np.isfinite(arr).any() else float("nan")


def _std(values):
    arr = np.asarray(values, dtype=float)
    arr = arr[np.isfinite(arr)]
    return float(arr.std(ddof=1)) if arr.size > 1 else 0.0


def _fit_row(density, fit: FitResult):
    return [density] + fit.to_csv_row().split(",")


def cmd_analyze(args) -> int:
    scenario, kind = args.preset.split("-")
    densities, scales = DEFAULT_SWEEPS[args.preset]
    if args.densities:
        densities = args.densities
    if args.density is not None:
        densities = [args.density]
    override = args.scales_area if scenario == "urban" else args.scales_length
    scales = override or scales
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    jobs = [(scenario, float(d), float(s), args.seed + i, args.placement)
            for d in densities for s in scales for i in range(args.runs)]
    results = _map(_analyze_point, jobs, args.jobs)
    reports = [r for r, _ in results]

    _write_csv(out / "metrics.csv", MetricReport.CSV_HEADER.split(","),
               [r.to_csv_row().split(",") for r in reports])

    groups = {}
    for (scen, d, s, _, _), (rep, hist) in zip(jobs, results):
        groups.setdefault((d, s), []).append((rep, hist))

    check = Checks()
    handler = {"degree": _analyze_degree, "aspl": _analyze_aspl,
               "clustering": _analyze_clustering, "connectivity": _analyze_connectivity}[kind]
    handler(scenario, groups, out, check)
    return 1 if check.failed else 0


def _analyze_degree(scenario, groups, out, check):
    rows, fits, topo = [], [], []
    for (d, s), items in groups.items():
        counts = {}
        for _, hist in items:
            for k, c in hist.items():
                counts[k] = counts.get(k, 0) + c
        total = sum(counts.values())
        ks = np.array(sorted(counts), dtype=float)
        ps = np.array([counts[k] / total for k in sorted(counts)])
        rows += [[scenario, d, s, int(k), counts[int(k)], _num(p)] for k, p in zip(ks, ps)]
        try:
            g = fit_gaussian(ks, ps)
        except VanetError as exc:
            check(False, f"{scenario} density {d}: gaussian fit failed ({exc})")
            continue
        fits.append(_fit_row(d, g))
        try:
            pl = fit_powerlaw(ks, ps)
        except VanetError:
            pl = None  # fewer than 3 degrees with k >= 1: no power law to speak of
        if pl is not None:
            fits.append(_fit_row(d, pl))
        pl_r2 = pl.r_square if pl is not None else float("nan")
        scale_free = pl is not None and classify_topology(g, pl).scale_free
        topo.append([scenario, d, s, _num(g.r_square), _num(pl_r2), int(scale_free)])
        check(g.r_square >= DEGREE_R2_FLOOR and not scale_free,
              f"{scenario} density {d}: gaussian R2 {g.r_square:.4f} >= {DEGREE_R2_FLOOR}"
              f" and beats power law ({pl_r2:.4f})")
    _write_csv(out / "degree_distribution.csv",
               ["scenario", "density", "scale_param", "degree", "count", "probability"], rows)
    _write_csv(out / "degree_fits.csv", ["density"] + FitResult.CSV_HEADER.split(","), fits)
    _write_csv(out / "topology.csv", ["scenario", "density", "scale_param", "gaussian_r2",
                                      "powerlaw_r2", "scale_free"], topo)


def _per_scale(groups, attr):
    by_density = {}
    for (d, s), items in groups.items():
        vals = [getattr(rep, attr) for rep, _ in items]
        by_density.setdefault(d, []).append((s, _mean(vals), _std(vals)))
    return by_density


def _analyze_aspl(scenario, groups, out, check):
    by_density = _per_scale(groups, "aspl")
    rows, fits, topo = [], [], []
    for d, pts in by_density.items():
        rows += [[scenario, d, s, _num(m), _num(sd)] for s, m, sd in pts]
        pts = [(s, m) for s, m, _ in pts if math.isfinite(m)]
        if len(pts) < 3:
            log.warning("density %s: fewer than 3 finite ASPL points, no fits", d)
            continue
        x, y = np.array(pts).T
        try:
            pw = fit_power(x, y)
        except VanetError as exc:
            check(False, f"{scenario} density {d}: power fit failed ({exc})")
            continue
        lg = fit_log(x, y)
        fits += [_fit_row(d, pw), _fit_row(d, lg)]
        # same rule as classify_topology: ties go to the logarithm
        topo.append([scenario, d, _num(pw.r_square), _num(lg.r_square),
                     int(lg.r_square >= pw.r_square)])
    _write_csv(out / "aspl.csv", ["scenario", "density", "scale_param", "aspl_mean", "aspl_std"],
               rows)
    _write_csv(out / "aspl_fits.csv", ["density"] + FitResult.CSV_HEADER.split(","), fits)
    _write_csv(out / "small_world.csv", ["scenario", "density", "power_r2", "log_r2",
                                         "small_world_indicated"], topo)


def _analyze_clustering(scenario, groups, out, check):
    rows = []
    theory = THEORY_CLUSTERING[scenario]
    if theory is None:
        theory = analytic.clustering_2d()
    for (d, s), items in groups.items():
        trans = [rep.clustering_network for rep, _ in items]
        node = [rep.clustering_node_avg for rep, _ in items]
        m = _mean(trans)
        rows.append([scenario, d, s, _num(m), _num(_std(trans)), _num(_mean(node)),
                     _num(theory)])
        if scenario == "highway" and s >= 10:
            lo, hi = HIGHWAY_CLUSTERING_BAND
            check(lo <= m <= hi, f"highway density {d} length {s}: clustering {m:.4f} "
                                 f"in [{lo}, {hi}]")
    _write_csv(out / "clustering.csv", ["scenario", "density", "scale_param", "clust_trans_mean",
                                        "clust_trans_std", "clust_node_avg_mean", "theory"], rows)


def _analyze_connectivity(scenario, groups, out, check):
    rows = []
    by_scale = {}
    for (d, s), items in groups.items():
        conn = [rep.connectivity for rep, _ in items]
        comps = [rep.component_count for rep, _ in items]
        m = _mean(conn)
        rows.append([scenario, d, s, _num(m), _num(_std(conn)), _num(_mean(comps))])
        by_scale.setdefault(s, []).append((d, m))
    for s, pts in by_scale.items():
        pts.sort()
        vals = [m for _, m in pts]
        ok = all(b >= a for a, b in zip(vals, vals[1:]))
        check(ok, f"{scenario} scale {s}: mean connectivity non-decreasing in density")
    _write_csv(out / "connectivity.csv", ["scenario", "density", "scale_param",
                                          "connectivity_mean", "connectivity_std",
                                          "components_mean"], rows)


# -- simulate ---------------------------------------------------------------------

def _simulate_point(job):
    density, mechanism, runs, seed, warmup, collect, trace = job
    cfg = SimConfig.for_density(density, runs=runs, base_seed=seed, warmup_s=warmup,
                                collect_s=collect)
    return run_simulation(cfg, mechanism, keep_runs=trace)


def cmd_simulate(args) -> int:
    mechanisms = [resolve_mechanism(m) for m in (args.mechanism or MECHANISMS)]
    mechanisms = list(dict.fromkeys(mechanisms))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(float(d), m, args.runs, args.seed, args.warmup, args.collect, args.trace)
            for d in args.densities for m in mechanisms]
    results = _map(_simulate_point, jobs, args.jobs)
    rows = [(job[0], sm) for job, sm in zip(jobs, results)]
    write_results(rows, out / "sim_results.csv", out / "sim_aggregate.csv")
    if args.trace:
        for d, sm in rows:
            if sm.runs:
                write_trace(sm.runs[0].trace, out / f"trace_{sm.mechanism}_{d:g}.csv")

    check = Checks()
    table = {(d, sm.mechanism): sm for d, sm in rows}
    summary = []
    for d in dict.fromkeys(d for d, _ in rows):
        base = table.get((d, "baseline"))
        for m in mechanisms:
            sm = table[(d, m)]
            if base is None:
                continue
            tx_change = 100.0 * (sm.avg_msgs_transmitted / base.avg_msgs_transmitted - 1.0) \
                if base.avg_msgs_transmitted > 0 else float("nan")
            summary.append([d, m, _num(tx_change),
                            _num(100.0 * (sm.reachability - base.reachability))])
        ps = table.get((d, "p_and_s"))
        if base is not None and ps is not None and d >= SIM_CHECK_DENSITY:
            red = 1.0 - ps.avg_msgs_transmitted / base.avg_msgs_transmitted
            check(red >= SIM_TX_REDUCTION,
                  f"density {d:g}: p_and_s tx reduction {100 * red:.1f}% >= "
                  f"{100 * SIM_TX_REDUCTION:.0f}%")
        oracle = table.get((d, "flooding_oracle"))
        if oracle is not None:
            ref = dict(zip(oracle.run_ids, oracle._column("reachability")))
            ok = all(r <= ref[i] + 1e-12 for m in mechanisms if m != "flooding_oracle"
                     for i, r in zip(table[(d, m)].run_ids, table[(d, m)]._column("reachability"))
                     if i in ref)
            check(ok, f"density {d:g}: oracle reachability dominates every mechanism")
    _write_csv(out / "sim_summary.csv", ["density", "mechanism", "tx_change_pct_vs_baseline",
                                         "reachability_change_pts"], summary)
    return 1 if check.failed else 0


# -- oracle -----------------------------------------------------------------------

def cmd_oracle(args) -> int:
    check = Checks()
    c2, c1 = analytic.clustering_2d(), analytic.clustering_1d_quadrature()
    print(f"clustering_2d {c2:.6f}")
    print(f"clustering_1d {c1:.6f}")
    check(abs(c2 - 0.5865) <= 5e-4, "2-D quadrature = 0.5865 +- 5e-4")
    check(abs(c1 - 0.75) <= 1e-12, "1-D quadrature = 0.75 +- 1e-12")
    if args.mc_samples > 0:
        for dim, ref in ((2, c2), (1, c1)):
            est, se = analytic.monte_carlo_clustering(dim, args.mc_samples, args.seed + dim)
            print(f"monte_carlo_{dim}d {est:.6f} (se {se:.2e})")
            check(abs(est - ref) <= 3 * se, f"{dim}-D Monte-Carlo within 3 sigma of quadrature")
    return 1 if check.failed else 0


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except argparse.ArgumentTypeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except (VanetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
