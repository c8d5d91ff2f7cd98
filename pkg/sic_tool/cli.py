"""Command-line interface: `run`, `sweep` and `budget` on a scenario file or preset."""

import argparse
import logging
import sys

from . import core
from .config import BASELINE_MODES
from .logger_config import setup_logging
from .reports import FORMATS

logger = logging.getLogger("SicToolLogger")

EXIT_OK = 0
EXIT_FAILURE = 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sic-sim",
        description="Full-duplex OFDM digital self-interference cancellation simulator",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, help="Command to run")

    commands = {
        "run": "Simulate the scenario's base cell (sweep axes ignored)",
        "sweep": "Simulate every cell of the scenario's sweep",
        "budget": "Tabulate received noise powers against SI power",
    }
    for name, help_text in commands.items():
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument(
            "config",
            help="Scenario JSON file, or the name of a preset in presets/ (e.g. distortion_levels)",
        )
        sub.add_argument("--seed", type=int, help="Master RNG seed (overrides rng_seed)")
        sub.add_argument("-o", "--out", help="Output file; nothing is written when omitted")
        sub.add_argument("--format", choices=FORMATS, default="csv", help="Output format (default: csv)")
        sub.add_argument(
            "--baseline",
            choices=[mode.replace("_", "-") for mode in BASELINE_MODES],
            help="Receiver pipeline (overrides baseline_mode)",
        )
        sub.add_argument("--iterations", type=int, help="Outer estimation iterations (overrides estimation.n_outer)")
        sub.add_argument("--trials", type=int, help="Monte Carlo trials per cell (overrides n_monte_carlo)")
        sub.add_argument("--workers", type=int, help="Parallel worker processes for sweep cells")
        sub.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    return parser


def overrides_from_args(args):
    """Maps command-line flags onto dotted scenario overrides."""
    overrides = {}
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    if args.baseline is not None:
        overrides["baseline_mode"] = args.baseline.replace("-", "_")
    if args.iterations is not None:
        overrides["estimation.n_outer"] = args.iterations
    if args.trials is not None:
        overrides["n_monte_carlo"] = args.trials
    if args.workers is not None:
        overrides["workers"] = args.workers
    return overrides


def _print_summary(result):
    rows = result.rows
    if rows.empty:
        print("No rows.")
        return
    preferred = [
        c
        for c in ("cell_index", "si_power_db", "ridn_total_db", "ridn_linear_db", "gap_to_linear_db", "rate_fd")
        if c in rows.columns
    ]
    print(rows[preferred or list(rows.columns)].to_string(index=False))


def main(argv=None):
    """Entry point. Returns the process exit code (argparse exits with 2 on usage errors)."""
    args = build_parser().parse_args(argv)
    if args.verbose:
        setup_logging(level=logging.DEBUG)

    success, message, result = core.run_scenario_file(
        args.config,
        command=args.command,
        output_path=args.out,
        output_format=args.format,
        overrides=overrides_from_args(args),
    )
    if not success:
        print(f"Error: {message}", file=sys.stderr)
        return EXIT_FAILURE

    if args.out:
        print(f"Results written to {message}")
    else:
        _print_summary(result)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
