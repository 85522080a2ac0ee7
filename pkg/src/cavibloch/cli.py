"""Command-line interface.

    cavibloch run --config run.json [--preset fig2a_uphill] [--out DIR] [--threads K] [--strict]
    cavibloch list-presets
    cavibloch validate --config run.json

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 validity-regime violation in strict mode.  Environment overrides are
limited to CAVIBLOCH_OUTPUT_DIR and CAVIBLOCH_THREADS.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from dataclasses import replace

from .config import ConfigError, list_presets, load_config, preset_config
from .errors import NumericsError, RegimeWarning
from .runner import run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICS = 3
EXIT_REGIME = 4


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavibloch",
        description="Bloch oscillations of a cold-atom cloud in a driven cavity",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario and write its data files")
    run_p.add_argument("--config", help="JSON run configuration")
    run_p.add_argument("--preset", help="preset scenario name (overrides the file's)")
    run_p.add_argument("--out", help="output directory (overrides config)")
    run_p.add_argument("--threads", type=int, help="worker processes for sweeps")
    run_p.add_argument("--strict", action="store_true",
                       help="treat validity-regime warnings as errors (exit 4)")

    sub.add_parser("list-presets", help="print available scenario presets")

    val_p = sub.add_parser("validate", help="check a configuration and exit")
    val_p.add_argument("--config", required=True)
    return parser


def _resolve_run_config(args):
    out_env = os.environ.get("CAVIBLOCH_OUTPUT_DIR")
    if args.config:
        config = load_config(args.config, preset_override=args.preset)
    elif args.preset:
        config = preset_config(args.preset)
    else:
        raise ConfigError("run needs --config and/or --preset")
    outdir = args.out or out_env
    if outdir:
        config = replace(config, output_dir=outdir)
        if config.branches:
            config = replace(
                config,
                branches=tuple(
                    (name, replace(branch, output_dir=os.path.join(outdir, name)))
                    for name, branch in config.branches
                ),
            )
    return config


def main(argv=None) -> int:
    args = _parser().parse_args(argv)

    if args.command == "list-presets":
        for name in list_presets():
            print(name)
        return EXIT_OK

    if args.command == "validate":
        try:
            config = load_config(args.config)
        except ConfigError as err:
            print(f"invalid: {err}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"ok: scenario {config.name}")
        return EXIT_OK

    threads = args.threads
    if threads is None and os.environ.get("CAVIBLOCH_THREADS"):
        threads = int(os.environ["CAVIBLOCH_THREADS"])
    try:
        config = _resolve_run_config(args)
        if args.strict:
            with warnings.catch_warnings():
                warnings.simplefilter("error", RegimeWarning)
                run_scenario(config, threads=threads)
        else:
            run_scenario(config, threads=threads)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericsError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICS
    except RegimeWarning as err:
        print(f"validity-regime violation: {err}", file=sys.stderr)
        return EXIT_REGIME
    except ValueError as err:  # domain validation raised past load_config
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {config.output_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
