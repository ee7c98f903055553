"""``foilskin`` command line.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure (1 for any other library error).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from ..errors import ConfigError, DataError, FoilskinError
from . import commands
from .config import default_config_text, load_config, with_seed

COMMANDS = {
    "generate": commands.cmd_generate,
    "train": commands.cmd_train,
    "evaluate": commands.cmd_evaluate,
    "control": commands.cmd_control,
    "report": commands.cmd_report,
}
HELP = {
    "generate": "simulate the training routine and write capacitance/marker logs",
    "train": "align the logs, split them and train the shape estimator",
    "evaluate": "tip-error statistics of the trained estimator on the held-out split",
    "control": "closed-loop step suite and tracking grid",
    "report": "run any missing stage, then render figures and a combined summary",
}


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _epochs(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("epochs must be non-negative")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI-style run configuration")
    common.add_argument("--out", metavar="DIR", default="foilskin-out", help="output directory")
    common.add_argument("--seed", type=_seed, help="root seed (overrides [run] seed)")
    common.add_argument("--epochs", type=_epochs, help="training epochs (overrides [train] epochs)")
    common.add_argument("-q", "--quiet", action="store_true", help="only print errors")

    parser = argparse.ArgumentParser(prog="foilskin", description=__doc__.splitlines()[0])
    parser.add_argument("--print-config", action="store_true",
                        help="print the default configuration and exit")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HELP[name], description=HELP[name])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_config:
        sys.stdout.write(default_config_text())
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = with_seed(cfg, args.seed)
        if args.epochs is not None:
            cfg = replace(cfg, train=replace(cfg.train, epochs=args.epochs))
        COMMANDS[args.command](cfg, args.out)
    except FoilskinError as exc:
        print(f"foilskin: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"foilskin: error: {exc}", file=sys.stderr)
        return DataError.exit_code
    except ValueError as exc:
        # parameter validation inside the library
        print(f"foilskin: error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
