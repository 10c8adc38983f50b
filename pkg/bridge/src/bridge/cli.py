"""Command line entry: ``bridge parse|semeval|vectors``.

Exit codes: 0 success, 1 usage error, 2 data or backend error.
"""

from __future__ import annotations

import argparse
import sys

from .backends import available_backends, get_backend
from .convert import convert_semeval_xml, parse_reviews
from .records import BridgeError
from .vectors import export_sentence_vectors


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bridge",
        description="Convert raw reviews and gold XML into the parsed-corpus interchange format",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--backend", default="builtin",
                        help=f"parser/embedding backend ({', '.join(available_backends())})")
    common.add_argument("--in", dest="inp", required=True, metavar="PATH", help="input file")
    common.add_argument("--out", required=True, metavar="PATH", help="output file")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    sub.add_parser("parse", parents=[common],
                   help="JSON-lines reviews to dependency-parsed corpus")
    sub.add_parser("semeval", parents=[common],
                   help="SemEval-2014 ABSA XML to gold-tagged corpus")
    vec = sub.add_parser("vectors", parents=[common],
                         help="corpus file to JSON-lines sentence vectors")
    vec.add_argument("--dim", type=int, default=None,
                     help="embedding dimension override (builtin backend)")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None):
            print("usage error: run with --help for details", file=sys.stderr)
            return 1
        return 0
    try:
        backend = get_backend(args.backend, dimension=getattr(args, "dim", None))
        if args.command == "parse":
            report = parse_reviews(args.inp, backend, args.out)
            for message in report.messages:
                print(f"warning: {message}", file=sys.stderr)
            print(f"wrote {report.reviews} reviews ({report.sentences} sentences), "
                  f"skipped {report.skipped} records -> {args.out}")
        elif args.command == "semeval":
            report = convert_semeval_xml(args.inp, backend, args.out)
            for message in report.messages:
                print(f"warning: {message}", file=sys.stderr)
            print(f"wrote {report.sentences} sentences ({report.terms} terms, "
                  f"{report.mismatches} projection mismatches) -> {args.out}")
        else:
            report = export_sentence_vectors(args.inp, backend, args.out)
            print(f"wrote {report.count} vectors (dimension {report.dimension}) -> {args.out}")
    except (BridgeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
