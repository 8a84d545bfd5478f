"""basin-forge command line.

Exit codes: 0 verification passed (or the command succeeded), 1 verification
failed, 2 construction error, 3 usage error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import fileio
from .dynamics import DEFAULT_OUTER, chart_radius_for, classify_grid, verify_approximation
from .model import ConstructionError
from .pipeline import ConfigError, PipelineResult, RunConfig, StageError, construct, construction_summary, normalization_point, run_pipeline, set_threads
from .scenarios import SCENARIOS, generate_scenario
from .sphere import MobiusTransform, ResolutionError, mobius_normalize

EXIT_PASS, EXIT_FAIL, EXIT_CONSTRUCT, EXIT_USAGE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _run_options(p):
    p.add_argument("--config", help="key = value file; flags override its entries")
    p.add_argument("--scenario", help=f"built-in name ({', '.join(SCENARIOS)}) or an RGNS file")
    p.add_argument("--d", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--res", dest="resolution", type=int)
    p.add_argument("--chart-radius", type=float, help="region chart half-width (default 8/eps)")
    p.add_argument("--julia-budget", type=int)
    p.add_argument("--outer-budget", type=int)
    p.add_argument("--root-budget", type=int)
    p.add_argument("--node-budget", type=int)
    p.add_argument("--eta-start", type=int)
    p.add_argument("--eta-stop", type=int)
    p.add_argument("--min-n", type=int)
    p.add_argument("--seed", type=int)


_RUN_KEYS = ("scenario", "d", "eps", "resolution", "chart_radius", "julia_budget", "outer_budget", "root_budget", "node_budget", "eta_start", "eta_stop", "min_n", "seed")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="basin-forge", description="Rational maps whose attracting basins approximate given regions of the sphere.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="rasterize a built-in scenario to an RGNS file")
    p.add_argument("--scenario", required=True, choices=SCENARIOS)
    p.add_argument("--d", type=int)
    p.add_argument("--res", dest="resolution", type=int, default=512)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--chart-radius", type=float)
    g.add_argument("--eps", type=float, help="chart half-width 8/eps")
    p.add_argument("--out", required=True)
    p.add_argument("--ppm", help="also write the regions as an image")

    p = sub.add_parser("construct", help="build S_n for an RGNS file and write an SMAP file")
    p.add_argument("--regions", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--working-regions", help="write the regions in the construction frame here")
    for flag in ("--julia-budget", "--root-budget", "--node-budget", "--eta-start", "--eta-stop", "--min-n", "--seed"):
        p.add_argument(flag, type=int)

    p = sub.add_parser("render", help="classify a chart for an SMAP file")
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True, help="BCHT file")
    p.add_argument("--regions", help="working-frame regions; the chart is then sized to hold them and every pole")
    p.add_argument("--res", dest="resolution", type=int)
    p.add_argument("--chart-radius", type=float)
    p.add_argument("--input-frame", action="store_true", help="pixels are input coordinates (the map's transform is applied)")
    p.add_argument("--outer-budget", type=int, default=DEFAULT_OUTER)
    p.add_argument("--ppm")
    p.add_argument("--pgm")

    p = sub.add_parser("verify", help="Hausdorff check of a chart against regions")
    p.add_argument("--regions", required=True)
    p.add_argument("--chart", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--report", help="write the report here (default: stdout)")

    p = sub.add_parser("run", help="full pipeline")
    _run_options(p)
    p.add_argument("--out", help="output directory")
    return ap


def _config(args) -> RunConfig:
    values = fileio.read_config(args.config) if args.config else {}
    for k in _RUN_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    if args.out is not None:
        values["out"] = args.out
    return RunConfig.from_mapping(values)


def cmd_generate(args) -> int:
    radius = args.chart_radius if args.chart_radius is not None else (8 / args.eps if args.eps else 32.0)
    regions = generate_scenario(args.scenario, args.d, args.resolution, radius)
    fileio.write_regions(args.out, regions)
    if args.ppm:
        fileio.write_ppm(args.ppm, regions.labels)
    print(f"wrote {args.out}: d = {regions.d}, N = {regions.resolution}, L0 = {regions.chart_radius:.17g}")
    return EXIT_PASS


def cmd_construct(args) -> int:
    regions = fileio.read_regions(args.regions)
    regions.validate(args.eps)
    keys = ("julia_budget", "root_budget", "node_budget", "eta_start", "eta_stop", "min_n", "seed")
    config = RunConfig.from_mapping({"scenario": args.regions, "eps": args.eps, "resolution": max(64, regions.resolution), **{k: getattr(args, k) for k in keys}})
    p = normalization_point(regions)
    work, tr = (regions, MobiusTransform()) if p is None else mobius_normalize(regions, p)
    res = PipelineResult(config, regions, work, tr)
    construct(work, args.eps, config, res)
    fileio.write_map(args.out, res.map)
    if args.working_regions:
        fileio.write_regions(args.working_regions, work)
    info = construction_summary(res)
    for k in ("transform", "lambda", "delta", "poles", "runge_sup_error", "eta", "n"):
        print(f"{k} = {info[k]}")
    return EXIT_PASS


def cmd_render(args) -> int:
    m = fileio.read_map(args.map)
    if args.regions:
        regions = fileio.read_regions(args.regions)
        radius = args.chart_radius or chart_radius_for(m, regions)
        n = args.resolution or int(round(2 * radius / regions.pixel_size))
    else:
        if args.chart_radius is None or args.resolution is None:
            raise ConfigError("render needs --regions or both --chart-radius and --res")
        radius, n = args.chart_radius, args.resolution
    chart = classify_grid(m, n, radius, args.outer_budget, transform=m.transform if args.input_frame else None)
    fileio.write_chart(args.out, chart)
    if args.ppm:
        fileio.write_ppm(args.ppm, chart.labels)
    if args.pgm:
        fileio.write_pgm(args.pgm, chart.counts)
    print(f"wrote {args.out}: N = {n}, L = {radius:.17g}")
    return EXIT_PASS


def cmd_verify(args) -> int:
    regions = fileio.read_regions(args.regions)
    chart = fileio.read_chart(args.chart)
    rep = verify_approximation(regions, chart, args.eps)
    if args.report:
        fileio.write_report(args.report, rep)
    else:
        sys.stdout.write(rep.to_text())
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_run(args) -> int:
    config = _config(args)
    res = run_pipeline(config)
    rep = res.report
    for k, v in rep.values.items():
        if k.startswith("hausdorff") or k in ("pass", "n", "poles", "nonconverged_fraction"):
            print(f"{k} = {v}")
    if config.out:
        print(f"artifacts in {Path(config.out).resolve()}")
    return EXIT_PASS if rep.passed else EXIT_FAIL


COMMANDS = {"generate": cmd_generate, "construct": cmd_construct, "render": cmd_render, "verify": cmd_verify, "run": cmd_run}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        set_threads()
        return COMMANDS[args.command](args)
    except StageError as e:
        print(f"basin-forge: {e}", file=sys.stderr)
        cause = e.__cause__
        if isinstance(cause, (ConfigError, ResolutionError)) or (e.stage == "generate" and isinstance(cause, ValueError)):
            return EXIT_USAGE
        return EXIT_CONSTRUCT
    except ConstructionError as e:
        print(f"basin-forge: construction failed: {e}", file=sys.stderr)
        return EXIT_CONSTRUCT
    except (ConfigError, ValueError, OSError) as e:
        print(f"basin-forge: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
