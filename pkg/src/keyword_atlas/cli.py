"""The ``atlas`` command: run pipeline stages from a TOML config file.

Exit codes: 0 success, 2 usage or configuration problem, 3 missing
prerequisite stage, 4 offline replay miss, 5 external service failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .errors import (
    AtlasError,
    ConfigError,
    DependencyError,
    QueryError,
    ReplayError,
    TransportError,
)
from .openalex import Transport
from .pipeline import STAGES, load_config, run_stage

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEPENDENCY = 3
EXIT_REPLAY = 4
EXIT_EXTERNAL = 5

MAILTO_ENV = "ATLAS_MAILTO"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="atlas",
        description="Build the keyword association atlas, stage by stage.",
    )
    parser.add_argument(
        "stage",
        choices=list(STAGES) + ["all"],
        help="pipeline stage to run ('all' runs every stage in order)",
    )
    parser.add_argument("--config", required=True, help="path to the TOML config file")
    parser.add_argument(
        "--offline",
        action="store_true",
        help="replay hit counts from the cache; never touch the network",
    )
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument(
        "--mailto",
        help=f"contact email for API requests (overrides ${MAILTO_ENV} and the config)",
    )
    parser.add_argument(
        "--force",
        action="store_true",
        help="rerun stages even when inputs are unchanged",
    )
    return parser


def main(argv: list[str] | None = None, transport: Transport | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        mailto = args.mailto or os.environ.get(MAILTO_ENV) or config.mailto
        overrides: dict = {"mailto": mailto}
        if args.offline:
            overrides["mode"] = "offline"
        if args.seed is not None:
            overrides["seed"] = args.seed
        config = replace(config, **overrides)
        report = run_stage(args.stage, config, transport=transport, force=args.force)
    except ConfigError as exc:
        print(f"atlas: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DependencyError as exc:
        print(f"atlas: {exc}", file=sys.stderr)
        return EXIT_DEPENDENCY
    except ReplayError as exc:
        print(f"atlas: {exc}", file=sys.stderr)
        return EXIT_REPLAY
    except (TransportError, QueryError) as exc:
        print(f"atlas: external service failure: {exc}", file=sys.stderr)
        return EXIT_EXTERNAL
    except AtlasError as exc:
        print(f"atlas: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for name, info in report["stages"].items():
        print(f"{name}: {info['status']} ({info['seconds']:.2f}s)")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
