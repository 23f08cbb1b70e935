"""Command-line entry point: ``hardynls <task> --config PATH [--out DIR] [--seed N] [--strict]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import HardyNLSError, UsageError
from .io import parse_config, write_json
from .io.persist import dumps
from .io.runner import run

SUBCOMMANDS = {
    "groundstate": "groundstate",
    "evolve": "evolve",
    "stability": "stability",
    "instability-i": "instability-I",
    "instability-ii": "instability-II",
    "gn-survey": "gn-survey",
    "virial-check": "virial-check",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="JSON or YAML run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides the config's 'output')")
    common.add_argument("--seed", type=int, metavar="N", help="seed (overrides the config's 'seed')")
    common.add_argument("--strict", action="store_true", help="reject unknown configuration keys")
    parser = argparse.ArgumentParser(
        prog="hardynls",
        description="Ground states, evolution and virial experiments for NLS with an inverse-square potential.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="TASK")
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {SUBCOMMANDS[name]} task")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; keep that distinct from config errors
        return UsageError.exit_code if exc.code not in (0, None) else 0
    task = SUBCOMMANDS[args.command]
    try:
        cfg = parse_config(args.config, task=task, strict=args.strict)
    except HardyNLSError as exc:
        sys.stderr.write(dumps(exc.to_record()))
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            write_json(Path(args.out) / "error.json", exc.to_record())
        return exc.exit_code
    if args.seed is not None:
        cfg = type(cfg)(**{**cfg.__dict__, "seed": args.seed, "resolved": {**cfg.resolved, "seed": args.seed}})
    out = args.out or cfg.output
    if not out:
        sys.stderr.write("no output directory: pass --out or set 'output' in the config\n")
        return UsageError.exit_code
    code = run(cfg, out)
    if code:
        sys.stderr.write(f"run failed with exit code {code}; see {Path(out) / 'error.json'}\n")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
