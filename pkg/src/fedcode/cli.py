"""Command-line entry points.

Two subcommands: `run` executes one experiment (or its accounting-only
schedule) and `sweep` runs a Cartesian grid over protocol axes. Both write
CSV reports and figures into the output directory and print a short summary.
Exit code 0 on success, 2 on configuration errors. Set FEDCODE_LOG to a
logging level name (e.g. DEBUG) for verbose output.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

from .config import DEFAULTS, METHODS, PRESETS, ExperimentConfig, load_config
from .errors import ConfigurationError
from .runner import (
    RunReport,
    accounting_only,
    parse_axis_values,
    prepare_data,
    run,
    sweep,
    write_dtr_csv,
    write_run_csv,
    write_sweep_csv,
)

__all__ = ["build_parser", "main"]

log = logging.getLogger("fedcode")


def _defaults_epilog() -> str:
    lines = ["config keys and defaults:"]
    for field in dataclasses.fields(ExperimentConfig):
        lines.append(f"  {field.name} = {getattr(DEFAULTS, field.name)!r}")
    lines.append(f"presets: {', '.join(sorted(PRESETS))}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedcode",
        description="Deterministic federated learning with codebook transfer.",
        epilog=_defaults_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one experiment")
    run_p.add_argument("--config", required=True, help="path to a flat JSON config file")
    run_p.add_argument("--method", choices=METHODS, help="override the configured method")
    run_p.add_argument("--seed", type=int, help="override the configured seed")
    run_p.add_argument("--out", help="output directory (default from config)")
    run_p.add_argument(
        "--accounting-only",
        action="store_true",
        help="run only the transfer schedule and ledger, no model math",
    )
    run_p.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    sweep_p = sub.add_parser("sweep", help="run a Cartesian grid of experiments")
    sweep_p.add_argument("--config", required=True, help="path to a flat JSON config file")
    sweep_p.add_argument(
        "--axis",
        action="append",
        required=True,
        metavar="NAME=V1,V2,...",
        help="sweep axis, e.g. K=16,32,64,128 (repeatable; axes form a grid)",
    )
    sweep_p.add_argument("--method", choices=METHODS, help="override the configured method")
    sweep_p.add_argument("--seed", type=int, help="override the configured seed")
    sweep_p.add_argument("--out", help="output directory (default from config)")
    sweep_p.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    return parser


def _apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    overrides = {}
    if args.method is not None:
        overrides["method"] = args.method
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if getattr(args, "no_plots", False):
        overrides["plots"] = False
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config.validate()


def _print_run_summary(report: RunReport) -> None:
    dtr = report.dtr
    print(f"method            {report.method}")
    print(f"rounds            {len(report.records)}")
    print(f"final accuracy    {report.final_accuracy:.4f}")
    print(f"best accuracy     {report.best_accuracy:.4f}")
    print(f"down DTR          {dtr.down_dtr:.2f}")
    print(f"up DTR            {dtr.up_dtr:.2f}")
    print(f"total DTR         {dtr.total_dtr:.2f}")
    print(f"transmitted MB    {dtr.transmitted_megabytes:.2f}")
    print(f"baseline MB       {dtr.fedavg_bits / 8 / 1_000_000:.2f}")


def _cmd_run(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_config(args.config), args)
    out_dir = Path(config.out_dir)

    if args.accounting_only:
        dtr = accounting_only(config)
        path = write_dtr_csv(dtr, out_dir / "dtr_summary.csv")
        print(f"method            {config.method} (accounting only)")
        print(f"down DTR          {dtr.down_dtr:.2f}")
        print(f"up DTR            {dtr.up_dtr:.2f}")
        print(f"total DTR         {dtr.total_dtr:.2f}")
        print(f"transmitted MB    {dtr.transmitted_megabytes:.2f}")
        print(f"baseline MB       {dtr.fedavg_bits / 8 / 1_000_000:.2f}")
        print(f"wrote {path}")
        if config.plots:
            from .plots import render_dtr_figure

            fig = render_dtr_figure(
                config.accounting_params,
                config.clusters,
                config.f1,
                config.f2,
                config.wordlength,
                dtr.total_dtr,
                out_dir / "dtr_curve.png",
            )
            print(f"wrote {fig}")
        return 0

    report = run(config)
    _print_run_summary(report)
    if config.compare_fedavg and config.method != "fedavg":
        paired = run(dataclasses.replace(config, method="fedavg"), prepare_data(config))
        delta = (report.final_accuracy - paired.final_accuracy) * 100
        print(f"paired fedavg     {paired.final_accuracy:.4f} (delta {delta:+.2f} points)")
    path = write_run_csv(report, out_dir / "report.csv")
    print(f"wrote {path}")
    if config.plots:
        from .plots import render_run_figure

        fig = render_run_figure(report, out_dir / "report.png")
        print(f"wrote {fig}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_config(args.config), args)
    out_dir = Path(config.out_dir)
    axes: dict[str, list] = {}
    for spec_text in args.axis:
        if "=" not in spec_text:
            raise ConfigurationError(f"axis {spec_text!r} must look like NAME=V1,V2")
        name, _, values = spec_text.partition("=")
        name = name.strip()
        if name in axes:
            raise ConfigurationError(f"axis {name} given more than once")
        axes[name] = parse_axis_values(name, values)

    cells = sweep(config, axes)
    path = write_sweep_csv(cells, out_dir / "sweep.csv")
    for cell in cells:
        label = ", ".join(f"{k}={v}" for k, v in cell.axis_values.items())
        print(
            f"{label}: final accuracy {cell.report.final_accuracy:.4f}, "
            f"total DTR {cell.report.dtr.total_dtr:.2f}"
        )
    print(f"wrote {path}")
    if config.plots:
        from .plots import render_sweep_figure

        fig = render_sweep_figure(cells, out_dir / "sweep.png")
        print(f"wrote {fig}")
    return 0


def main(argv: list[str] | None = None) -> int:
    level_name = os.environ.get("FEDCODE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.WARNING))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_sweep(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
