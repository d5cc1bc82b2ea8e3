"""Command-line front end.

Every subcommand writes its artifacts (JSON, CSV, SVG) under the output
directory: ``--out-dir``, else $STRINGBILLIARD_OUT_DIR, else the current
directory.  Exit status is 0 on success, 2 on usage errors and 1 when a
numerical step fails.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import artifacts, plots
from .classify import (TOL_SUPPORT, classify_orbit, focal_convergence, focal_starts,
                       forbidden_region, is_caustic)
from .dynamics import launch, trace, trace_focal, trace_many
from .errors import BilliardError, DomainError
from .periodic import (birkhoff_pair, exhaustive_count, find_periodic_orbit, island_orbit,
                       make_orbit, symmetric_orbit)
from .sos import (REDUCTIONS, THICKNESS_LIMIT, build_section, focal_curve_images,
                  match_focal_curve, thickness_test)
from .stability import TOL_NEUTRAL, analyze, closed_form_12_5
from .table import build_table, curvature_range, verify_c2

OUT_ENV = "STRINGBILLIARD_OUT_DIR"
# keys that name files or directories; left out of the config echo so that
# runs writing to different places still produce identical bytes
_PATH_KEYS = {"out_dir", "json", "csv", "svg", "orbit", "thickness", "trajectory", "func"}


class UsageError(Exception):
    pass


# --- helpers ---------------------------------------------------------------------

def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in _PATH_KEYS and v is not None}
    if isinstance(cfg.get("batch"), str) and not cfg["batch"].isdigit():
        cfg["batch"] = artifacts.read_json(cfg["batch"])
    return cfg


def _out(args, name: str | None, default: str | None = None) -> Path | None:
    name = name if name is not None else default
    if name is None:
        return None
    p = Path(name)
    return p if p.is_absolute() else Path(args.out_dir) / p


def _table(args):
    frame = args.frame or ("hexagon" if args.n == 6 else "generic")
    return build_table(args.n, frame)


def _starts(args, table):
    """Start points and unit directions from --s/--theta, --start/--direction or --batch."""
    if args.batch is not None:
        cfg = _batch_config(args)
        rng = np.random.default_rng(cfg["seed"])
        s = rng.uniform(0.0, table.boundary_length, cfg["count"])
        th = rng.uniform(cfg["theta_min"], cfg["theta_max"], cfg["count"])
        return launch(table, s, th)
    if args.start is not None:
        if args.direction is None:
            raise UsageError("--start needs --direction")
        d = np.asarray(args.direction, dtype=float)
        if not np.linalg.norm(d) > 0:
            raise UsageError("--direction must be non-zero")
        return np.array([args.start], dtype=float), np.array([d / np.linalg.norm(d)])
    if args.s is not None and args.theta is not None:
        if not 0.0 < args.theta < math.pi:
            raise UsageError("--theta must lie in (0, pi)")
        return launch(table, [args.s], [args.theta])
    raise UsageError("give --s and --theta, --start and --direction, or --batch")


def _batch_config(args) -> dict:
    """--batch is a count or a JSON file with count and optional seed/theta range."""
    spec = args.batch
    cfg = {"theta_min": 0.02, "theta_max": math.pi - 0.02}
    if str(spec).isdigit():
        cfg["count"] = int(spec)
    else:
        try:
            cfg.update(artifacts.read_json(spec))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read batch config {spec!r}: {exc}") from None
        if "count" not in cfg:
            raise UsageError("batch config needs a 'count'")
    if args.seed is not None:
        cfg["seed"] = args.seed
    if cfg.get("seed") is None:
        raise UsageError("batch mode needs a seed (--seed or 'seed' in the config)")
    args.seed = int(cfg["seed"])
    return cfg


def _load_orbits(table, path):
    data = artifacts.read_json(path)
    entries = data.get("orbits", [data])
    out = []
    for e in entries:
        out.append(make_orbit(table, np.asarray(e["u"], dtype=float), k=e.get("k"),
                              label=e.get("label", "")))
    return out


# --- subcommands -------------------------------------------------------------------

def cmd_table(args) -> int:
    table = _table(args)
    smooth = verify_c2(table)
    kmin, kmax = curvature_range(table)
    payload = {"table": table.to_dict(), "c2_passed": smooth.passed,
               "curvature_range": [kmin, kmax]}
    cfg = _config(args)
    artifacts.write_json(_out(args, args.json, "table.json"), payload, cfg, args.seed)
    if args.svg:
        plots.table_figure(table, _out(args, args.svg))
    print(f"n = {table.n}  l = {table.string_length!r}  L = {table.boundary_length!r}  "
          f"C2 {'ok' if smooth.passed else 'FAILED'}")
    return 0


def cmd_trace(args) -> int:
    table = _table(args)
    P, D = _starts(args, table)
    trajs = trace_many(table, P, D, args.bounces)
    cfg = _config(args)
    columns = ["trajectory_id", "index", "arc_id", "t", "x", "y", "s", "theta", "chord_length"]
    rows = ((i, *row) for i, tr in enumerate(trajs) for row in tr.rows())
    artifacts.write_csv(_out(args, args.csv, "trace.csv"), columns, rows, cfg, args.seed)
    if args.svg:
        plots.trajectory_figure(table, trajs[0], _out(args, args.svg))
    print(f"traced {len(trajs)} trajectory(ies) x {args.bounces} bounces")
    return 0


def cmd_classify(args) -> int:
    table = _table(args)
    P, D = _starts(args, table)
    trajs = trace_many(table, P, D, args.bounces)
    results = [classify_orbit(tr, tol_support=args.tol_support) for tr in trajs]
    hist = {}
    for r in results:
        hist[r.tag] = hist.get(r.tag, 0) + 1
    payload = {"histogram": hist, "orbits": [r.to_dict() for r in results]}
    artifacts.write_json(_out(args, args.json, "classify.json"), payload, _config(args), args.seed)
    print(" ".join(f"{k}={v}" for k, v in sorted(hist.items())))
    return 0


def _periodic_orbits(args, table):
    mode = args.mode
    if mode == "symmetric":
        return [symmetric_orbit(table, args.winding)], {}
    if mode == "birkhoff":
        return list(birkhoff_pair(table, args.period, args.winding)), {}
    if mode == "newton":
        return [find_periodic_orbit(table, args.period, args.winding,
                                    label=f"{args.period}/{args.winding}")], {}
    if mode == "neutral":
        center = [o for o in birkhoff_pair(table, args.period, args.winding)
                  if analyze(table, o).tag == "stable"]
        if not center:
            raise DomainError(f"no stable ({args.period},{args.winding}) orbit to build on")
        orb = island_orbit(table, center[0], args.q, args.r_max,
                           label=f"{args.period * args.q}/{args.winding * args.q}")
        return [orb], {"center": center[0].to_dict()}
    if mode == "exhaustive":
        res = exhaustive_count(table, args.period)
        extra = {k: v for k, v in res.items() if k != "orbits"}
        return res["orbits"], {"count": extra}
    raise UsageError(f"unknown mode {mode!r}")


def cmd_periodic(args) -> int:
    table = _table(args)
    if table.n != 6:
        raise UsageError("periodic orbits are searched on the hexagon table (--n 6)")
    orbits, extra = _periodic_orbits(args, table)
    payload = {"orbits": [o.to_dict() for o in orbits], **extra}
    artifacts.write_json(_out(args, args.json, "periodic.json"), payload, _config(args), args.seed)
    if args.svg:
        plots.orbit_figure(table, orbits, _out(args, args.svg))
    for o in orbits:
        print(f"{o.label or o.n}: n={o.n} k={o.k} closure={o.closure_residual:.2e} "
              f"perimeter={o.perimeter!r}")
    if "count" in extra:
        print(" ".join(f"{k}={v}" for k, v in extra["count"].items()))
    return 0


def cmd_stability(args) -> int:
    table = _table(args)
    if args.orbit:
        orbits = _load_orbits(table, args.orbit)
    elif args.period is not None and args.winding is not None:
        orbits, _ = _periodic_orbits(args, table)
    else:
        raise UsageError("give --orbit FILE or --period/--winding with --mode")
    reports = []
    for o in orbits:
        rep = analyze(table, o, tol_neutral=args.tol_neutral)
        reports.append({"label": o.label, "n": o.n, "k": o.k, **rep.to_dict()})
        print(f"{o.label or o.n}: Tr = {rep.trace!r}  {rep.tag}")
    payload = {"reports": reports}
    if args.closed_form:
        T, S, M = closed_form_12_5()
        payload["closed_form_12_5"] = {"T": T.tolist(), "S": S.tolist(), "M": M.tolist(),
                                       "trace": float(np.trace(M))}
    artifacts.write_json(_out(args, args.json, "stability.json"), payload, _config(args), args.seed)
    return 0


def _trajectory_from_csv(args, table):
    """Re-trace the first trajectory of a bounce CSV from its first recorded bounce."""
    columns, rows = artifacts.read_csv(args.trajectory)
    try:
        i_s, i_th = columns.index("s"), columns.index("theta")
    except ValueError:
        raise UsageError(f"{args.trajectory} is not a bounce CSV") from None
    if "trajectory_id" in columns:
        tid = columns.index("trajectory_id")
        rows = [r for r in rows if r[tid] == rows[0][tid]]
    if not rows:
        raise UsageError(f"{args.trajectory} has no bounces")
    P, D = launch(table, [float(rows[0][i_s])], [float(rows[0][i_th])])
    return trace(table, P[0], D[0], args.bounces or len(rows))


def cmd_forbidden(args) -> int:
    table = _table(args)
    if args.trajectory:
        tr = _trajectory_from_csv(args, table)
    else:
        P, D = _starts(args, table)
        tr = trace(table, P[0], D[0], args.bounces or 300)
    cls = classify_orbit(tr)
    region = forbidden_region(tr, orientation=args.orientation)
    caustic, gaps = is_caustic(region.polygon, tr) if not region.empty else (False, np.array([]))
    payload = {"classification": cls.to_dict(), "region": region.to_dict(), "caustic": caustic,
               "max_support_gap": float(np.abs(gaps).max()) if len(gaps) else None}
    artifacts.write_json(_out(args, args.json, "forbidden.json"), payload, _config(args), args.seed)
    if args.svg:
        plots.region_figure(table, tr, region, _out(args, args.svg))
    print(f"{cls.tag}: region with {len(region.polygon)} vertices, area {region.polygon.area!r}")
    return 0


def cmd_sos(args) -> int:
    table = _table(args)
    if args.batch is None:
        raise UsageError("sos needs --batch COUNT|CONFIG and a seed")
    P, D = _starts(args, table)
    trajs = trace_many(table, P, D, args.bounces)
    section = build_section(trajs, args.reduction)
    cfg = _config(args)
    artifacts.write_csv(_out(args, args.csv, "sos.csv"),
                        ["trajectory_id", "bounce_index", "s", "theta"],
                        section.rows(), cfg, args.seed)
    if args.svg:
        plots.section_figure(section, _out(args, args.svg), title=f"{len(trajs)} orbits")
    if args.thickness:
        reports = thickness_test(section)
        passed = sum(r.passed for r in reports)
        artifacts.write_json(_out(args, args.thickness),
                             {"passed": passed, "total": len(reports),
                              "limit": THICKNESS_LIMIT * table.boundary_length,
                              "orbits": [r.to_dict() for r in reports]}, cfg, args.seed)
        print(f"thickness: {passed}/{len(reports)} below limit")
    print(f"section: {len(section)} points from {len(trajs)} orbits")
    return 0


def cmd_focal(args) -> int:
    table = _table(args)
    if table.frame != "hexagon":
        raise UsageError("focal orbits are analysed on the hexagon table")
    if args.seed is None:
        raise UsageError("focal needs --seed")
    rng = np.random.default_rng(args.seed)
    starts = focal_starts(table, args.label, args.count, rng)
    trajs = [trace_focal(table, p, args.label, args.bounces) for p in starts]
    series = [focal_convergence(tr) for tr in trajs]
    section = build_section(trajs)
    match = match_focal_curve(section)
    orbits = []
    for ser in series:
        orbits.append({"converged_at": ser.converged_at,
                       "final_triangle_distance": ser.final_triangle_distance,
                       "limit_triangle": ser.limit_triangle,
                       "limits": ser.limits, "bounds": ser.check_bounds()})
    cfg = _config(args)
    artifacts.write_json(_out(args, args.json, "focal.json"),
                         {"curve_match": match.to_dict(), "orbits": orbits}, cfg, args.seed)
    rows = ((i, j, ser.s[j], ser.t[j], ser.phi[j], ser.alpha[j])
            for i, ser in enumerate(series) for j in range(len(ser.s)))
    artifacts.write_csv(_out(args, args.csv, "focal.csv"),
                        ["orbit", "bounce", "s", "t", "phi", "alpha"], rows, cfg, args.seed)
    if args.svg:
        svg = _out(args, args.svg)
        plots.section_figure(section, svg, focal_curve_images(table.boundary_length, match.offset),
                             title="focal orbits")
        plots.focal_figure(series, svg.with_name(svg.stem + "-convergence.svg"))
    print(f"curve match: offset {match.offset!r}, max residual {match.max_residual:.3e}")
    return 0


def cmd_report(args) -> int:
    """The experiment suite: one artifact set per subcommand, all seeded."""
    base = Path(args.out_dir)
    seed = args.seed if args.seed is not None else 0
    small = args.quick
    runs = [
        ["table", "--json", "table.json", "--svg", "table.svg"],
        ["trace", "--s", "1.0", "--theta", "1.1", "--bounces", "50" if small else "400",
         "--csv", "trace.csv", "--svg", "trace.svg"],
        ["classify", "--batch", "10" if small else "200", "--bounces", "100" if small else "1000",
         "--json", "classify.json"],
        ["periodic", "--mode", "symmetric", "--winding", "5", "--json", "symmetric5.json",
         "--svg", "symmetric5.svg"],
        ["periodic", "--mode", "birkhoff", "--period", "3", "--winding", "1",
         "--json", "birkhoff3_1.json", "--svg", "birkhoff3_1.svg"],
        ["stability", "--orbit", str(base / "birkhoff3_1.json"), "--json", "stability3_1.json"],
        ["forbidden", "--s", "0.7", "--theta", "0.6", "--bounces", "60" if small else "300",
         "--json", "forbidden.json", "--svg", "forbidden.svg"],
        ["sos", "--batch", "6" if small else "70", "--bounces", "60" if small else "480",
         "--csv", "sos.csv", "--svg", "sos.svg"],
        ["focal", "--count", "4" if small else "50", "--bounces", "40" if small else "200",
         "--json", "focal.json", "--csv", "focal.csv", "--svg", "focal.svg"],
    ]
    if not small:
        runs.append(["periodic", "--mode", "birkhoff", "--period", "12", "--winding", "5",
                     "--json", "birkhoff12_5.json", "--svg", "birkhoff12_5.svg"])
        runs.append(["stability", "--orbit", str(base / "birkhoff12_5.json"), "--closed-form",
                     "--json", "stability12_5.json"])
    for argv in runs:
        status = main(["--out-dir", str(base), argv[0], "--seed", str(seed), *argv[1:]])
        if status:
            return status
    return 0


# --- parser ---------------------------------------------------------------------------

def _add_table(p):
    p.add_argument("--n", type=int, default=6, help="polygon sides (default 6)")
    p.add_argument("--frame", choices=["generic", "hexagon"], default=None,
                   help="coordinate frame (default: hexagon for n = 6)")
    p.add_argument("--seed", type=int, default=None, help="random seed (recorded in outputs)")


def _add_start(p, batch: bool = True):
    p.add_argument("--s", type=float, help="start arc length")
    p.add_argument("--theta", type=float, help="start angle against the ccw tangent (radians)")
    p.add_argument("--start", type=float, nargs=2, metavar=("X", "Y"))
    p.add_argument("--direction", type=float, nargs=2, metavar=("DX", "DY"))
    if batch:
        p.add_argument("--batch", help="COUNT or JSON config {count, seed, theta_min, theta_max}")
    else:
        p.set_defaults(batch=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stringbilliard", description=__doc__.split("\n")[0])
    ap.add_argument("--out-dir", default=os.environ.get(OUT_ENV, "."),
                    help=f"output directory (default ${OUT_ENV} or .)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table", help="build a table, check C2 smoothness")
    _add_table(p)
    p.add_argument("--json")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("trace", help="trace trajectories to a bounce CSV")
    _add_table(p)
    _add_start(p)
    p.add_argument("--bounces", type=int, default=100)
    p.add_argument("--csv")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("classify", help="focal / inner / outer classification")
    _add_table(p)
    _add_start(p)
    p.add_argument("--bounces", type=int, default=1000)
    p.add_argument("--tol-support", type=float, default=TOL_SUPPORT)
    p.add_argument("--json")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("periodic", help="periodic orbit search")
    _add_table(p)
    p.add_argument("--mode", choices=["symmetric", "birkhoff", "newton", "neutral", "exhaustive"],
                   default="birkhoff")
    p.add_argument("--period", type=int, help="bounce count n")
    p.add_argument("--winding", type=int, help="rotation number k")
    p.add_argument("--q", type=int, default=9, help="neutral mode: turns around the island")
    p.add_argument("--r-max", type=float, default=0.8, help="neutral mode: island radius bound")
    p.add_argument("--json")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_periodic)

    p = sub.add_parser("stability", help="deviation-matrix trace and stability tag")
    _add_table(p)
    p.add_argument("--orbit", help="orbit JSON written by 'periodic'")
    p.add_argument("--mode", choices=["symmetric", "birkhoff", "newton", "neutral"], default="birkhoff")
    p.add_argument("--period", type=int)
    p.add_argument("--winding", type=int)
    p.add_argument("--q", type=int, default=9)
    p.add_argument("--r-max", type=float, default=0.8)
    p.add_argument("--tol-neutral", type=float, default=TOL_NEUTRAL)
    p.add_argument("--closed-form", action="store_true", help="add the closed-form 12/5 blocks")
    p.add_argument("--json")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("forbidden", help="forbidden inner region of one trajectory")
    _add_table(p)
    _add_start(p, batch=False)
    p.add_argument("--trajectory", help="bounce CSV written by 'trace' (first trajectory is used)")
    p.add_argument("--bounces", type=int, default=None, help="default: 300, or the CSV's length")
    p.add_argument("--orientation", choices=["auto", "ccw", "cw"], default="auto")
    p.add_argument("--json")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_forbidden)

    p = sub.add_parser("sos", help="surface of section of a seeded batch")
    _add_table(p)
    _add_start(p)
    p.add_argument("--bounces", type=int, default=480)
    p.add_argument("--reduction", choices=REDUCTIONS, default="full")
    p.add_argument("--thickness", help="write the curve-thickness report to this JSON")
    p.add_argument("--csv")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_sos)

    p = sub.add_parser("focal", help="focal orbits: convergence and section curve")
    _add_table(p)
    p.add_argument("--label", type=int, default=2, help="focus the first chord passes through")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--bounces", type=int, default=200)
    p.add_argument("--json")
    p.add_argument("--csv")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_focal)

    p = sub.add_parser("report", help="run the whole experiment suite into --out-dir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true", help="small sizes (for smoke tests)")
    p.set_defaults(func=cmd_report)
    # also accepted after the subcommand; SUPPRESS keeps the global value when absent
    for p in sub.choices.values():
        p.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory")
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"stringbilliard {args.command}: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"stringbilliard {args.command}: invalid input: {exc}", file=sys.stderr)
        return 2
    except BilliardError as exc:
        print(f"stringbilliard {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
