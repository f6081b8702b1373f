"""Command-line front end: scenario-driven experiments and reports.

Subcommands:
  cost      closed-form cost report (JSON + CSV; --sweep for studies)
  schedule  build a schedule, verify it, and emit all artifacts
  check     re-verify an existing schedule file against a scenario
  par       population-based peak-to-average power ratio report
  grid      export the service cell grid as CSV

Exit codes: 0 success, 2 parse/config error, 3 geometry or visibility
failure, 4 feasibility violations, 5 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from . import costs as costs_mod
from . import population as pop_mod
from .cells import build_cell_grid
from .constellation import propagate, write_states_csv
from .errors import (
    GeometryError,
    LeopntError,
    ParameterError,
    ParseError,
    SaturationError,
)
from .feasibility import check_feasibility
from .scenario import load_scenario
from .schedule import GnssSchedule, read_schedule_binary, write_schedule_binary
from .scheduler import greedy_schedule, randomized_schedule

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_GEOMETRY = 3
EXIT_FEASIBILITY = 4
EXIT_IO = 5


def _write_json(obj, path):
    with open(path, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")


def cmd_cost(args) -> int:
    scenario = load_scenario(args.scenario, overrides=args.override)
    out_dir = args.out or scenario.output_dir()
    os.makedirs(out_dir, exist_ok=True)
    sweeps = [None]
    key = None
    if args.sweep:
        dotted, values = args.sweep.split("=", 1)
        if "." in dotted:
            key = dotted
        else:
            homes = [s for s, body in scenario.sections.items() if dotted in body]
            if len(homes) != 1:
                raise ParseError(f"sweep key {dotted!r} is not a unique scenario key "
                                 f"(found in sections: {homes})")
            key = f"{homes[0]}.{dotted}"
        sweeps = values.split(",")
    rows = []
    for value in sweeps:
        sc = scenario
        if value is not None:
            sc = load_scenario(args.scenario, overrides=list(args.override) + [f"{key}={value}"])
        p = sc.cost_params()
        report = costs_mod.cost_report(p, steer_loss_budget=sc.steer_loss_budget())
        rows.append((value, report))
    base = rows[0][1]
    _write_json(base.to_json_dict(), os.path.join(out_dir, "cost_report.json"))
    with open(os.path.join(out_dir, "cost_report.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        header = base.csv_fields()
        writer.writerow((["sweep_value"] if key else []) + header)
        for value, report in rows:
            writer.writerow(([value] if key else []) + report.csv_row())
    print(f"cost: R_TX={base.r_tx:.4%} R_RX={base.r_rx:.4%} R_DL={base.r_dl:.4%} "
          f"R_SU={base.r_su:.3%} R_E={base.r_e:.3%} d_PNT={base.d_pnt:.3%} "
          f"C_AU={base.c_au_mib:.2f} MiB")
    return EXIT_OK


def _build_inputs(scenario, args):
    grid = build_cell_grid(scenario.grid_params())
    config = scenario.constellation()
    timing = scenario.timing()
    cfg = scenario.scheduler_config(
        mode=args.mode, seed=args.seed, order=args.order)
    return grid, config, timing, cfg


def cmd_schedule(args) -> int:
    scenario = load_scenario(args.scenario, overrides=args.override)
    out_dir = args.out or scenario.output_dir()
    os.makedirs(out_dir, exist_ok=True)
    grid, config, timing, cfg = _build_inputs(scenario, args)
    runner = randomized_schedule if cfg.mode == "randomized" else greedy_schedule
    schedule, stats, tx_cube, rx_cube = runner(grid, config, timing, cfg)

    schedule.to_json(os.path.join(out_dir, "schedule.json"))
    write_schedule_binary(schedule, os.path.join(out_dir, "schedule.bin"))
    _write_json(stats.to_json_dict(), os.path.join(out_dir, "stats.json"))
    if args.dump_states:
        states = propagate(config, cfg.epoch_s, grid.params.earth_radius_km)
        write_states_csv(states, os.path.join(out_dir, "sv_states.csv"))

    p = scenario.cost_params(grid=grid, config=config)
    report = costs_mod.cost_report(p, schedule, tx_cube, rx_cube,
                                   steer_loss_budget=scenario.steer_loss_budget())
    _write_json(report.to_json_dict(), os.path.join(out_dir, "cost_report.json"))

    from .constellation import propagate_arrays
    sv_pos, _ = propagate_arrays(config, cfg.epoch_s, grid.params.earth_radius_km)
    feas = check_feasibility(schedule, grid, sv_pos, config, timing,
                             geo_mask_halfwidth_deg=cfg.geo_mask_halfwidth_deg)
    feas.to_json(os.path.join(out_dir, "feasibility.json"))

    print(f"schedule: {len(schedule.assignments)} assignments over "
          f"{grid.n_cells} cells, {stats.total_steps} steps, "
          f"{len(stats.cells_failed)} failed cells, "
          f"{len(feas.violations)} violations")
    if stats.cells_failed:
        print(f"failed cells: {stats.cells_failed[:20]}"
              + (" ..." if len(stats.cells_failed) > 20 else ""))
        return EXIT_GEOMETRY
    if not feas.feasible:
        return EXIT_FEASIBILITY
    return EXIT_OK


def cmd_check(args) -> int:
    scenario = load_scenario(args.scenario, overrides=args.override)
    if args.schedule.endswith(".json"):
        schedule = GnssSchedule.from_json(args.schedule)
    else:
        schedule = read_schedule_binary(args.schedule)
    grid = build_cell_grid(scenario.grid_params())
    config = scenario.constellation()
    timing = scenario.timing()
    cfg = scenario.scheduler_config()
    from .constellation import propagate_arrays
    sv_pos, _ = propagate_arrays(config, cfg.epoch_s, grid.params.earth_radius_km)
    feas = check_feasibility(schedule, grid, sv_pos, config, timing,
                             geo_mask_halfwidth_deg=cfg.geo_mask_halfwidth_deg)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        feas.to_json(os.path.join(args.out, "feasibility.json"))
    counts = feas.counts()
    print(f"check: {feas.n_assignments} assignments, "
          f"{len(feas.violations)} violations"
          + (f" {counts}" if counts else ""))
    return EXIT_OK if feas.feasible else EXIT_FEASIBILITY


def cmd_par(args) -> int:
    scenario = load_scenario(args.scenario, overrides=args.override)
    out_dir = args.out or scenario.output_dir()
    os.makedirs(out_dir, exist_ok=True)
    params = scenario.par_params()
    raster = args.raster or scenario.raster_path("raster")
    if raster is None:
        raise ParameterError("no population raster: set [population] raster "
                             "or pass --raster")
    grid = pop_mod.load_density_grid(raster)
    tpath = scenario.raster_path("threshold_raster")
    tgrid = pop_mod.load_density_grid(tpath) if tpath else None
    report = pop_mod.par_pipeline(grid, params, threshold_grid=tgrid)
    _write_json(report.to_json_dict(), os.path.join(out_dir, "par_report.json"))
    print(f"par: PAR={report.par:.3f} peak={report.peak:.4g} mean={report.mean:.4g}")
    return EXIT_OK


def cmd_grid(args) -> int:
    scenario = load_scenario(args.scenario, overrides=args.override)
    out_dir = args.out or scenario.output_dir()
    os.makedirs(out_dir, exist_ok=True)
    grid = build_cell_grid(scenario.grid_params())
    path = os.path.join(out_dir, "cells.csv")
    grid.to_csv(path)
    print(f"grid: {grid.n_cells} cells, mean degree {grid.mean_degree():.3f} -> {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leopnt",
        description="Ranging-burst scheduling and opportunity-cost engine "
                    "for broadband LEO constellations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", help="scenario file (defaults reproduce "
                                          "the reference parameter set)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--override", action="append", default=[],
                       metavar="SECTION.KEY=VALUE",
                       help="override one scenario value (repeatable)")

    p_cost = sub.add_parser("cost", help="closed-form cost report")
    common(p_cost)
    p_cost.add_argument("--sweep", metavar="KEY=A,B,C",
                        help="emit one CSV row per value of a [cost] key")
    p_cost.set_defaults(func=cmd_cost)

    p_sched = sub.add_parser("schedule", help="build and verify a schedule")
    common(p_sched)
    p_sched.add_argument("--seed", type=int, help="scheduler RNG seed")
    p_sched.add_argument("--mode", choices=["greedy", "randomized"])
    p_sched.add_argument("--order", choices=["id", "random", "geo"],
                         help="cell iteration order")
    p_sched.add_argument("--dump-states", action="store_true",
                         help="also dump SV states as CSV")
    p_sched.set_defaults(func=cmd_schedule)

    p_check = sub.add_parser("check", help="verify an existing schedule file")
    common(p_check)
    p_check.add_argument("schedule", help="schedule .json or .bin")
    p_check.set_defaults(func=cmd_check)

    p_par = sub.add_parser("par", help="peak-to-average power ratio report")
    common(p_par)
    p_par.add_argument("--raster", help="population raster path")
    p_par.set_defaults(func=cmd_par)

    p_grid = sub.add_parser("grid", help="export the cell grid as CSV")
    common(p_grid)
    p_grid.set_defaults(func=cmd_grid)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ParameterError, SaturationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except GeometryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except LeopntError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


def console_entry():
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
