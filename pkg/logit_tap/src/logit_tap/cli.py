"""Command line front end: `logit-tap dump` and `logit-tap validate`."""

from __future__ import annotations

import argparse
import sys

from .dump import dump_run
from .errors import LogitTapError
from .validate import validate_dump

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 on usage errors; we reserve 2 for runtime
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="logit-tap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    dump = sub.add_parser("dump", help="greedy-decode prompts and record top-k distributions")
    dump.add_argument("--model", required=True, help="tiny[:seed[:sharpness]] or transformers:<name>")
    dump.add_argument("--prompt", action="append", required=True, help="repeatable")
    dump.add_argument("--k", type=int, default=64)
    dump.add_argument("--steps", type=int, default=12)
    dump.add_argument("--stop", default=";", help="token that ends a walk")
    dump.add_argument("--joiner", default="", help="string inserted before each emitted token")
    dump.add_argument("--out", default=".")

    validate = sub.add_parser("validate", help="check dump files against the wire invariants")
    validate.add_argument("paths", nargs="+")
    return parser


def _cmd_dump(args) -> int:
    result = dump_run(
        args.model,
        args.prompt,
        args.out,
        k=args.k,
        max_steps=args.steps,
        stop_token=args.stop or None,
        joiner=args.joiner,
    )
    print(f"{result.model_id}: vocabulary {result.vocab_path}")
    for path in result.dump_paths:
        print(f"{result.model_id}: dump {path}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    dirty = 0
    for path in args.paths:
        report = validate_dump(path)
        if report.ok:
            print(f"{report.path}: ok ({report.records} records)")
        else:
            dirty += 1
            for v in report.violations:
                print(f"{report.path}:{v.line}: {v.code}: {v.message}")
    return EXIT_USAGE if dirty else EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "dump":
            return _cmd_dump(args)
        return _cmd_validate(args)
    except (ValueError, LogitTapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
