"""Command-line entry point ``anls``.

Each experiment is a subcommand whose flags mirror the keys of its config
section.  ``--config FILE`` loads a JSON config; flags given on the command
line override values from the file.

Exit codes: 0 pass, 1 error, 2 acceptance failure, 3 reproduction mismatch.
"""
from __future__ import annotations

import argparse
import os
import sys

from ..errors import AnlsError
from .config import SCHEMA, ExperimentConfig, load_config
from .runner import EXIT_ERROR, reproduce, run


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _globals(parser, suppress=True):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=d, help="master seed (default 0)")
    parser.add_argument("--threads", type=int, default=d,
                        help="worker threads (default: $ANLS_THREADS or 1); never changes results")
    parser.add_argument("--config", default=d, metavar="FILE", help="JSON config; flags override it")
    parser.add_argument("--out", default=d, metavar="DIR", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="anls", description="Run and reproduce numerical experiments.",
                     epilog="exit codes: 0 pass, 1 error, 2 acceptance failure, 3 reproduction mismatch")
    _globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name, schema in SCHEMA.items():
        p = sub.add_parser(name, help=f"run the {name} experiment", argument_default=argparse.SUPPRESS)
        _globals(p)
        for key, spec in schema.items():
            helptext = spec.help if "(default" in spec.help else f"{spec.help} (default: {spec.default})"
            if spec.type is bool:
                p.add_argument(_flag(key), dest=key, action="store_const", const=True, help=helptext)
            else:
                p.add_argument(_flag(key), dest=key, type=str, choices=spec.choices, help=helptext)
    r = sub.add_parser("reproduce", help="re-run from a manifest and compare digests")
    r.add_argument("manifest", help="manifest.json or the directory holding it")
    return parser


def config_from_args(ns: dict) -> ExperimentConfig:
    command = ns.get("command")
    base = load_config(ns["config"]) if ns.get("config") else None
    if base is None and command is None:
        raise UsageError("give a subcommand or --config FILE")
    experiment = command or base.experiment
    if base is not None and base.experiment != experiment:
        raise UsageError(f"config file is for {base.experiment!r}, not {experiment!r}")
    params = dict(base.parameters) if base else {}
    params.update({k: ns[k] for k in SCHEMA[experiment] if k in ns})
    seed = ns["seed"] if ns.get("seed") is not None else (base.seed if base else 0)
    out = ns["out"] if ns.get("out") is not None else (base.output_dir if base else None)
    threads = ns.get("threads")
    if threads is None:
        threads = base.threads if base and base.threads else None
    if threads is None and os.environ.get("ANLS_THREADS"):
        threads = int(os.environ["ANLS_THREADS"])
    return ExperimentConfig.build(experiment, params, seed, out, threads, base_dir=os.getcwd())


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = vars(parser.parse_args(argv))
        if ns.get("command") == "reproduce":
            res = reproduce(ns["manifest"])
            for line in res.differences:
                print(line, file=sys.stderr)
            print("reproduced" if not res.differences else f"{len(res.differences)} difference(s)")
            return res.exit_code
        result = run(config_from_args(ns))
        sys.stdout.write(result.stdout)
        return result.exit_code
    except UsageError as exc:
        print(f"anls: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (AnlsError, OSError, ValueError) as exc:
        print(f"anls: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
