"""Command line entry point: ``eschlab run|preset|constants``."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from eschlab import presets
from eschlab.model import ModelParams, correction_constant, solve_profile, surface_tension_constant


def _log(msg: str):
    print(msg, file=sys.stderr)


def _report(report: presets.PresetReport) -> int:
    for row in report.rows:
        faces = row.get("final_interfaces", "")
        print(f"eps={row['epsilon']:g} mbar={row['mbar']:g} status={row['status']} interfaces=[{faces}]")
    for msg in report.messages:
        print(msg, file=sys.stderr)
    return report.exit_code


def _cmd_run(args) -> int:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        preset = presets.parse_config(text)
    except OSError as exc:
        _log(f"cannot read {args.config}: {exc}")
        return presets.EXIT_CONFIG
    except presets.ConfigError as exc:
        _log(f"{args.config}: {exc}")
        return presets.EXIT_CONFIG
    return _report(presets.run_preset(preset, gnuplot=args.gnuplot, log=_log))


def _cmd_preset(args) -> int:
    try:
        preset = presets.get_preset(args.name)
    except ValueError as exc:
        _log(str(exc))
        return presets.EXIT_CONFIG
    if args.epsilon:
        if any(e <= 0 for e in args.epsilon):
            _log("epsilon values must be positive")
            return presets.EXIT_CONFIG
        preset = dataclasses.replace(preset, epsilon_list=tuple(args.epsilon))
    return _report(presets.run_preset(preset, out_dir=args.out, gnuplot=args.gnuplot, log=_log))


def _cmd_constants(args) -> int:
    params = ModelParams() if args.potential == "quartic" else ModelParams.logarithmic()
    profile = solve_profile(params)
    s = surface_tension_constant(profile, params)
    t = correction_constant(profile, params)
    print(f"S = {s!r}")
    print(f"T = {t!r}")
    return presets.EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eschlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a key=value configuration file")
    p_run.add_argument("config")
    p_run.add_argument("--gnuplot", action="store_true", help="also write plot.gp scripts")
    p_run.set_defaults(func=_cmd_run)

    p_pre = sub.add_parser("preset", help="run a built-in preset")
    p_pre.add_argument("name", help=", ".join(presets.PRESET_NAMES))
    p_pre.add_argument("--epsilon", type=float, nargs="+", help="override the epsilon list")
    p_pre.add_argument("--out", default=None, help="output root directory")
    p_pre.add_argument("--gnuplot", action="store_true", help="also write plot.gp scripts")
    p_pre.set_defaults(func=_cmd_preset)

    p_con = sub.add_parser("constants", help="print the calibration constants S and T")
    p_con.add_argument("--potential", choices=("quartic", "log"), default="quartic")
    p_con.set_defaults(func=_cmd_constants)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
