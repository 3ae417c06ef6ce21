"""Command-line entry point: ``barron-risk <command> --config file.json``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from barron_risk import config, experiments
from barron_risk.data import IdxFormatError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="barron-risk", description="Two-layer network risk experiments.")
    parser.add_argument("command", choices=sorted(experiments.RUNNERS))
    parser.add_argument("--config", help="JSON config; omitted keys take their defaults")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="master seed, 0 <= seed < 2**64")
    parser.add_argument("--threads", type=int, help="worker processes for independent cells")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        user = config.load(args.config) if args.config else {}
        if user.get("command", args.command) != args.command:
            raise config.ConfigError(f"config is for {user['command']!r}, not {args.command!r}")
        for key in ("out", "seed", "threads"):
            if getattr(args, key) is not None:
                user[key] = getattr(args, key)
        cfg = config.resolve(args.command, user)
        result = experiments.RUNNERS[args.command](cfg)
    except (config.ConfigError, experiments.DatasetNotFound, IdxFormatError, ValueError) as exc:
        print(f"barron-risk: error: {exc}", file=sys.stderr)
        return 2
    if args.command == "bound-report":
        print(result.render())
    else:
        print(json.dumps(result, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
