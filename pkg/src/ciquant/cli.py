"""Command line: ``ciquant run <model> ...`` and ``ciquant verify-all``.

Exit codes: 0 all checks pass, 1 a verification failed, 2 usage or model
file error, 3 the derivation itself failed.
"""

from __future__ import annotations

import argparse
import json
import sys

from .library import BUILTIN_NAMES
from .report import (
    EXIT_INTERNAL,
    EXIT_USAGE,
    ConfigError,
    PipelineError,
    RunConfig,
    render_text,
    run,
    validate_json,
    verify_all,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ciquant", description="Brackets of integration constants from the general solution.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="derive and check one model")
    r.add_argument("model", help=f"built-in name ({', '.join(BUILTIN_NAMES)}) or a model file")
    r.add_argument("--modes", type=int, dest="N", help="truncation order N (field models)")
    r.add_argument("--box", type=float, dest="L", help="box length L (field models)")
    r.add_argument("--mass", type=float, dest="m", help="mass (majorana, lightcone-scalar)")
    r.add_argument("--oracle", action="store_true", help="also estimate the table numerically")
    r.add_argument("--tol", type=float, default=1e-6, help="oracle tolerance (default 1e-6)")
    r.add_argument("--eta-schedule", type=float, nargs="+", default=(), metavar="ETA",
                   help="finite source couplings to tabulate (models with a source term)")
    r.add_argument("--no-limits", action="store_true", help="skip the equal-time limit checks")
    _output_args(r)

    v = sub.add_parser("verify-all", help="run every built-in with oracle and limits")
    v.add_argument("--jobs", type=int, default=1, help="models run in parallel")
    v.add_argument("--extra", nargs="*", default=(), metavar="FILE", help="additional model files")
    _output_args(v)
    return p


def _output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("text", "json"), default="text", dest="fmt")
    p.add_argument("--json", action="store_const", const="json", dest="fmt", help="same as --format json")
    p.add_argument("--out", help="write the report here instead of stdout")


def _emit(doc: dict, fmt: str, out: str | None) -> None:
    if fmt == "json":
        validate_json(doc)
        text = json.dumps(doc, indent=2) + "\n"
    else:
        text = render_text(doc)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = RunConfig(
                args.model, N=args.N, L=args.L, m=args.m, oracle=args.oracle, tol=args.tol,
                eta_schedule=tuple(args.eta_schedule), fmt=args.fmt, out=args.out, limits=not args.no_limits,
            )
            doc = run(config)
            _emit(doc, args.fmt, args.out)
            return doc["exit_code"]
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        doc = verify_all(jobs=args.jobs, extra=tuple(args.extra or ()))
        _emit(doc, args.fmt, args.out)
        return 0 if doc["pass"] else max(r["exit_code"] for r in doc["models"])
    except ConfigError as err:
        print(f"ciquant: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as err:
        print(f"ciquant: derivation failed: {err}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
