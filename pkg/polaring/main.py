#!/usr/bin/env python3
"""
polaring - exciton-polaron dynamics and spectroscopy of disordered nanorings.

Command-line entry point. Every subcommand reads an optional TOML
configuration, applies the command-line overrides on top of it and runs
through the same validation.
"""

import argparse
import logging
import sys
from typing import Any, Dict, Optional

from polaring.errors import ConfigError, ExclusionBudgetExceeded, OutputExistsError, PolaringError
from polaring.runner.config import EXPERIMENTS, RunConfig, load_config
from polaring.runner.ensemble import run_ensemble
from polaring.runner.experiments import dump_model
from polaring.runner.figures import FIGURE_ALIASES, figure_names, reproduce_figure, resolve_figure
from polaring.runner.output import OutputWriter

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_EXCLUSIONS = 3

# command-line flag -> config key
OVERRIDES = {
    "sigma_e": "disorder.sigma_e_cm1",
    "sigma_j": "disorder.sigma_j_cm1",
    "huang_rhys": "bath.huang_rhys",
    "bandwidth": "bath.bandwidth_w",
    "gamma_sink": "sink.gamma_omega0",
    "sink_site": "sink.site",
    "initial_site": "initial.site",
    "initial_kind": "initial.kind",
    "tmax": "integrator.t_max_fs",
    "dt": "integrator.dt_fs",
    "seed": "run.seed",
    "threads": "run.threads",
    "batch_size": "run.batch_size",
    "tw": "spectra.t_w_fs",
    "output": "run.output_dir",
}


def _common(parser: argparse.ArgumentParser, ensemble_key: bool = True) -> None:
    parser.add_argument(
        "--config", "-c",
        default=None,
        help="TOML run configuration (default: built-in values)"
    )

    # Model overrides
    parser.add_argument("--sigma-e", type=float, default=None, help="Site-energy disorder std (cm^-1)")
    parser.add_argument("--sigma-j", type=float, default=None, help="Coupling disorder std (cm^-1)")
    parser.add_argument("--huang-rhys", type=float, default=None, help="Huang-Rhys factor S")
    parser.add_argument("--bandwidth", type=float, default=None, help="Phonon bandwidth W (units of omega0)")
    parser.add_argument("--gamma-sink", type=float, default=None, help="Sink rate (units of omega0)")
    parser.add_argument("--sink-site", type=int, default=None, help="Sink site index")
    parser.add_argument("--initial-site", type=int, default=None, help="Initially excited site")
    parser.add_argument(
        "--initial-kind",
        default=None,
        choices=["site", "bright"],
        help="Initial state: localized site or clean-ring bright state"
    )

    # Integrator and ensemble
    parser.add_argument("--tmax", type=float, default=None, help="Trajectory length (fs)")
    parser.add_argument("--dt", type=float, default=None, help="RK4 step (fs)")
    if ensemble_key:
        parser.add_argument("--ensemble", "-n", type=int, default=None, help="Number of disorder realizations")
    parser.add_argument("--seed", type=int, default=None, help="Master seed")
    parser.add_argument(
        "--threads", "-j",
        type=int,
        default=None,
        help="Worker threads (default: $POLARING_THREADS or CPU count)"
    )
    parser.add_argument("--batch-size", type=int, default=None, help="Realizations per scheduled batch")
    parser.add_argument("--tw", type=float, nargs="+", default=None, help="Waiting times for 2D spectra (fs)")

    # Output
    parser.add_argument("--output", "-o", default=None, help="Output directory")
    parser.add_argument("--force", action="store_true", help="Overwrite a non-empty output directory")
    parser.add_argument("--plots", action="store_true", help="Also write PNG plots (needs matplotlib)")
    parser.add_argument("--quiet", "-q", action="store_true", help="Suppress status messages")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polaring",
        description="Exciton-polaron dynamics, statics and 2D spectra of disordered molecular nanorings"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    dump = sub.add_parser("dump-model", help="Write the exciton matrix and phonon modes of one realization")
    _common(dump, ensemble_key=False)
    dump.add_argument("--realization", type=int, default=0, help="Realization index (default: 0)")

    for name in EXPERIMENTS:
        _common(sub.add_parser(name, help=f"Run the {name} experiment"))

    figure = sub.add_parser("figure", help="Run a named parameter sweep and write its summary tables")
    _common(figure)
    figure.add_argument(
        "name",
        choices=figure_names() + list(FIGURE_ALIASES),
        help="Figure to reproduce (fig2 .. fig10, or a descriptive alias such as coherence-grid)"
    )
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides: Dict[str, Any] = {key: getattr(args, flag, None) for flag, key in OVERRIDES.items()}
    if args.command in EXPERIMENTS:
        overrides["run.experiment"] = args.command
        overrides["run.ensemble_size"] = args.ensemble
    if args.plots:
        overrides["run.plots"] = True
    if args.command == "figure":
        overrides["run.output_dir"] = None
    return load_config(args.config).with_overrides(overrides)


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else (logging.ERROR if args.quiet else logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    def status(message: str) -> None:
        if not args.quiet:
            print(message)

    try:
        config = config_from_args(args)

        if args.command == "dump-model":
            writer = OutputWriter(config.run.output_dir, force=args.force)
            dump_model(config, writer, args.realization)
            status(f"📁 Model written to: {writer.root}")
            return EXIT_OK

        if args.command == "figure":
            spec = resolve_figure(args.name)
            status(f"🖼️  Reproducing {spec.name} ({spec.alias}): {spec.description}")
            bundle = reproduce_figure(
                args.name,
                base=config,
                output_dir=args.output or "figures",
                ensemble_size=args.ensemble,
                threads=args.threads,
                force=args.force,
            )
            status(f"✅ {len(bundle.cells)} cells finished")
            for table, path in bundle.tables.items():
                status(f"   📝 {table}: {path}")
            return EXIT_OK

        status("=" * 50)
        status(f"🧠 polaring {config.run.experiment}")
        status("=" * 50)
        status(f"🔢 Realizations: {config.run.ensemble_size} (seed {config.run.seed})")
        status(f"🌊 S = {config.bath.huang_rhys}, W = {config.bath.bandwidth_w}")
        status(f"🎲 sigma_E = {config.disorder.sigma_e_cm1} cm-1, sigma_J = {config.disorder.sigma_j_cm1} cm-1")
        manifest, _ = run_ensemble(config, force=args.force, threads=args.threads)
        status(f"✅ Done in {manifest.wall_time_s:.1f}s, {manifest.exclusion_count} excluded")
        status(f"📁 Outputs in: {config.run.output_dir}")
        return EXIT_OK

    except ConfigError as e:
        print(f"❌ Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ExclusionBudgetExceeded as e:
        print(f"❌ Exclusion budget exceeded: {e}", file=sys.stderr)
        return EXIT_EXCLUSIONS
    except OutputExistsError as e:
        print(f"⚠️ {e}", file=sys.stderr)
        return EXIT_FAILED
    except PolaringError as e:
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAILED
    except KeyboardInterrupt:
        status("\n\n👋 Stopped.")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
