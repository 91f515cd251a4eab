"""Command-line front door: simulate single grids, run experiment configs,
render plots, export coupled trajectories, and report reversed-Lipschitz
frequencies."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .coupling import build_trajectory, check_reversed_lipschitz, export_trajectory
from .experiments import (
    ConfigError,
    gate_failures,
    load_spec,
    run,
    summary_table,
    wilson_interval,
)
from .lattice import GridShape, format_grid, geodesics, hi_mode_max, last_passage, sample_grid
from .weights import WeightModel

DEFAULT_MODEL = '{"atoms": [[0, 0.5], [1, 0.5]], "m": 0}'


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route usage problems to exit code 1
        raise _CliError(message)


def _parse_model(text: str) -> WeightModel:
    if text.startswith("@"):
        text = Path(text[1:]).read_text(encoding="utf-8")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _CliError(f"model literal is not valid JSON: {exc}") from exc
    try:
        return WeightModel.from_config(cfg)
    except (ValueError, TypeError) as exc:
        raise _CliError(f"invalid model: {exc}") from exc


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def build_parser() -> _Parser:
    parser = _Parser(prog="thinlpp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="one grid: passage time, hi-mode max, geodesics")
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--alpha", type=float, default=0.25)
    sim.add_argument("--model", default=DEFAULT_MODEL, help="JSON literal or @path")
    sim.add_argument("--seed", type=int, default=1)
    sim.add_argument("--tie-break", choices=("right", "up"), default="right")
    sim.add_argument("--dump-grid", metavar="PATH", default=None)

    runp = sub.add_parser("run", help="run an experiment config, persist a record")
    runp.add_argument("config", help="JSON experiment config")
    runp.add_argument("--out", default=None, help="record directory (default records/<kind>-<hash>)")
    runp.add_argument("--parallel", type=int, default=1)
    runp.add_argument("--resume", action="store_true")
    runp.add_argument("--check", action="store_true", help="exit 2 if acceptance gates fail")
    runp.add_argument("--no-figures", action="store_true")

    plot = sub.add_parser("plot", help="render a figure from a record or trajectory export")
    plot.add_argument("record", help="record directory (or export file for kind=trajectory)")
    plot.add_argument("--kind", required=True,
                      choices=("loglog_moments", "trajectory", "decay_curve", "shape_curve"))
    plot.add_argument("--out", required=True)

    couple = sub.add_parser("couple", help="build one coupled trajectory and export it")
    couple.add_argument("--n", type=int, required=True)
    couple.add_argument("--alpha", type=float, default=0.25)
    couple.add_argument("--model", default=DEFAULT_MODEL)
    couple.add_argument("--seed", type=int, default=1)
    couple.add_argument("--mode", choices=("incremental", "full_recompute"), default="incremental")
    couple.add_argument("--out", required=True)

    lip = sub.add_parser("lipschitz", help="reversed-Lipschitz frequency over trajectories")
    lip.add_argument("--n", type=int, required=True)
    lip.add_argument("--alpha", type=float, default=0.25)
    lip.add_argument("--model", default=DEFAULT_MODEL)
    lip.add_argument("--seed", type=int, default=1)
    lip.add_argument("--trajectories", type=int, default=100)
    lip.add_argument("--epsilon", type=float, default=None)
    lip.add_argument("--c1", type=float, default=None)
    lip.add_argument("--c5", type=float, default=None)
    lip.add_argument("--c-ell", type=float, default=None)
    lip.add_argument("--out", default=None, help="optional JSON report path")
    return parser


def _cmd_simulate(args) -> int:
    model = _parse_model(args.model)
    shape = GridShape(args.n, args.alpha)
    grid = sample_grid(shape, model, _rng(args.seed))
    result = last_passage(grid)
    geo = geodesics(grid, result, tie_break=args.tie_break)
    M = hi_mode_max(grid)
    print(f"n={shape.n} alpha={shape.alpha:g} rows={shape.rows} sites={shape.sites} seed={args.seed}")
    print(f"L = {result.value:g}")
    print(f"M = {M}  (M/n = {M / shape.n:.4f})")
    print(f"geodesic length = {len(geo.canonical)}")
    print(f"Card(G) = {len(geo.intersection)}")
    if args.dump_grid:
        Path(args.dump_grid).write_text(format_grid(grid), encoding="utf-8")
        print(f"grid written to {args.dump_grid}")
    return 0


def _cmd_run(args) -> int:
    spec = load_spec(args.config)
    out_dir = Path(args.out) if args.out else Path("records") / f"{spec.kind}-{spec.spec_hash()[:8]}"
    record = run(spec, parallelism=args.parallel, out_dir=out_dir, resume=args.resume)

    print(f"kind: {spec.kind}")
    print(f"record: {out_dir}")
    print(f"spec hash: {spec.spec_hash()}")
    buf = io.StringIO()
    writer = csv.writer(buf)
    header, rows = summary_table(record.summary)
    writer.writerow(header)
    writer.writerows(rows)
    print(buf.getvalue(), end="")

    if spec.kind == "moment_scaling":
        for key, fit in sorted(record.summary["fits"].items()):
            line = (
                f"r={key}: slope={fit['slope']:.4f} "
                f"ci=[{fit['slope_ci'][0]:.4f}, {fit['slope_ci'][1]:.4f}] "
                f"target={fit['target']:.4f}"
            )
            if "reference" in fit:
                line += f" reference={fit['reference']:.4f}"
            print(line)

    if not args.no_figures:
        from .plots import render_run_figures

        for path in render_run_figures(record.summary, out_dir):
            print(f"figure: {path}")

    if args.check:
        failures = gate_failures(record.summary, spec)
        if failures:
            for f in failures:
                print(f"GATE FAIL: {f}", file=sys.stderr)
            return 2
        print("all gates passed")
    return 0


def _cmd_plot(args) -> int:
    from .plots import render

    path = render(args.kind, args.record, args.out)
    print(f"wrote {path}")
    return 0


def _cmd_couple(args) -> int:
    model = _parse_model(args.model)
    shape = GridShape(args.n, args.alpha)
    traj = build_trajectory(shape, model, _rng(args.seed), mode=args.mode)
    report = check_reversed_lipschitz(traj)
    export_trajectory(traj, args.out, report=report)
    print(f"trajectory ({shape.sites} flips) written to {args.out}")
    print(f"L(0)={traj.L_traj[0]:g} L(sites)={traj.L_traj[-1]:g} o_n={report.o_n_holds}")
    return 0


def _cmd_lipschitz(args) -> int:
    model = _parse_model(args.model)
    shape = GridShape(args.n, args.alpha)
    rng = _rng(args.seed)
    holds = 0
    a_holds = 0
    constants = None
    for _ in range(args.trajectories):
        traj = build_trajectory(shape, model, rng)
        rep = check_reversed_lipschitz(
            traj, epsilon=args.epsilon, c1=args.c1, c5=args.c5, c_ell=args.c_ell
        )
        constants = rep.constants_dict()
        holds += rep.o_n_holds
        a_holds += bool(rep.a_holds)
    freq = holds / args.trajectories
    low, high = wilson_interval(holds, args.trajectories)
    print(f"n={shape.n} rows={shape.rows} trajectories={args.trajectories}")
    print("constants: " + " ".join(f"{k}={v:.6g}" for k, v in constants.items()))
    print(f"O_n frequency = {freq:.4f}  wilson95=[{low:.4f}, {high:.4f}]")
    print(f"hi-count event frequency = {a_holds / args.trajectories:.4f}")
    if args.out:
        Path(args.out).write_text(
            json.dumps(
                {
                    "n": shape.n,
                    "alpha": shape.alpha,
                    "trajectories": args.trajectories,
                    "constants": constants,
                    "o_n_freq": freq,
                    "wilson": [low, high],
                    "a_freq": a_holds / args.trajectories,
                },
                sort_keys=True,
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        print(f"report written to {args.out}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "run": _cmd_run,
    "plot": _cmd_plot,
    "couple": _cmd_couple,
    "lipschitz": _cmd_lipschitz,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
