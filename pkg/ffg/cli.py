"""
Command-line front-end: ``ffg run``, ``ffg validate`` and ``ffg sweet-spot``.
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

from . import __version__
from .config import load_config, numerics_from_config
from .errors import ConfigError, FfgError
from .harness import load_experiment, run, sweet_spot_residual, sweet_spot_solve

logger = logging.getLogger("ffg")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ffg", description="Floquet Hamiltonian engineering experiments."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging verbosity (default WARNING)",
    )
    parser.add_argument(
        "--config",
        default=None,
        help="JSON file with numerics/harness defaults, merged over built-ins",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("run", "Run an experiment config and write <output>.csv/.meta.json"),
        ("validate", "Validate a config and print it with defaults resolved"),
    ):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("experiment", help="Experiment config (JSON)")
        cmd.add_argument("--n-fock", type=int, default=None, help="Override Fock truncation N")
        cmd.add_argument("--m-max", type=int, default=None, help="Override Fourier truncation")
        cmd.add_argument("--l-max", type=int, default=None, help="Override Magnus harmonic cutoff")
        if name == "run":
            cmd.add_argument("--threads", type=int, default=None, help="Worker threads")
            cmd.add_argument("--out", default=None, help="Output directory")

    spot = sub.add_parser("sweet-spot", help="Smallest root of tan a^2 = -tanh a^2")
    spot.add_argument("--lo", type=float, default=1.0)
    spot.add_argument("--hi", type=float, default=2.0)
    return parser


def _resolve(args: argparse.Namespace):
    settings = load_config(args.config)
    experiment = load_experiment(args.experiment, numerics_from_config(settings))
    experiment = experiment.with_overrides(
        n_fock=args.n_fock, m_max=args.m_max, l_max=args.l_max
    )
    return settings, experiment


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point for the ``ffg`` console script.

    Returns:
        Process exit code: 0 on success, 2 for configuration errors, 1 for
        numerical failures
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "sweet-spot":
            alpha = sweet_spot_solve(args.lo, args.hi)
            print(json.dumps({"alpha": alpha, "residual": float(sweet_spot_residual(alpha))}))
            return 0

        settings, experiment = _resolve(args)
        if args.command == "validate":
            print(json.dumps(experiment.to_dict(), indent=2, sort_keys=True))
            return 0

        harness = settings.get("harness", {})
        threads = args.threads if args.threads is not None else harness.get("threads", 1)
        out = args.out if args.out is not None else harness.get("out", "results")
        table = run(experiment, threads=threads, out=out)
        summary = table.metadata.get("summary")
        if summary:
            print(json.dumps(summary, indent=2, sort_keys=True))
        return 0
    except ConfigError as e:
        print(f"ffg: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FfgError as e:
        print(f"ffg: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
