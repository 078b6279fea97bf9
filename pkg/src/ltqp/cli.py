"""Command-line entry point: ``ltqp generate | query | suite | check``.

Exit codes: 0 ok, 1 usage/config, 2 unsupported or malformed query,
3 cross-mode correctness failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .engine import ConfigurationError, ReachabilityMode, TraversalEngine, TraversalError
from .netsim import (FixtureIntegrityError, NetworkParams, ParamsError, check_network, generate_network,
                     load_fixture, save_fixture)
from .query import QueryError, parse_select, solution_line
from .report import load_queries, make_cases, results_digest, run_suite, seeds_from_query_text

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_QUERY = 2
EXIT_MISMATCH = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # subcommands accept the global flags too, without overriding them when absent
    def default(value):
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--workers", type=int, default=default(1),
                        help="concurrent fetch workers (default 1)")
    parser.add_argument("--json", action="store_true", default=default(False),
                        help="machine-readable output")
    parser.add_argument("--timeout-ms", type=int, default=default(60000),
                        help="simulated-latency budget per traversal (default 60000)")
    parser.add_argument("-v", "--verbose", action="count", default=default(0))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ltqp", description="Shape-index link traversal over simulated pods.")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    gen = sub.add_parser("generate", help="generate a fixture directory")
    gen.add_argument("--params", required=True, help="JSON network parameters")
    gen.add_argument("--out", required=True, help="output directory")
    _global_options(gen, suppress=True)

    q = sub.add_parser("query", help="run one query under one reachability mode")
    q.add_argument("--fixture", required=True)
    q.add_argument("--query", required=True, help=".rq file")
    q.add_argument("--mode", required=True, choices=[m.value for m in ReachabilityMode])
    q.add_argument("--seeds", help="comma-separated seed IRIs (default: query file, then manifest)")
    _global_options(q, suppress=True)

    s = sub.add_parser("suite", help="run every query under all modes and compare")
    s.add_argument("--fixture", required=True)
    s.add_argument("--queries", required=True, help="directory of .rq files")
    s.add_argument("--repeat", type=int, default=1)
    s.add_argument("--out", required=True, help="CSV report path; a .json twin is written beside it")
    _global_options(s, suppress=True)

    c = sub.add_parser("check", help="verify fixture validity, exclusivity and completeness flags")
    c.add_argument("--fixture", required=True)
    _global_options(c, suppress=True)
    return parser


def _fail(code: int, message: str) -> int:
    print(f"ltqp: {message}", file=sys.stderr)
    return code


def cmd_generate(args) -> int:
    try:
        raw = json.loads(Path(args.params).read_text(encoding="utf-8"))
        params = NetworkParams.from_dict(raw)
    except (OSError, json.JSONDecodeError, ParamsError) as exc:
        return _fail(EXIT_CONFIG, f"invalid params: {exc}")
    net = generate_network(params)
    save_fixture(net, args.out)
    summary = {"pods": params.pod_count, "documents": len(net.documents),
               "shapeDocuments": len(net.shape_docs), "out": str(args.out)}
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        print(f"generated {summary['pods']} pods, {summary['documents']} documents, "
              f"{summary['shapeDocuments']} shape documents in {args.out}")
    return EXIT_OK


def cmd_query(args) -> int:
    try:
        net = load_fixture(args.fixture)
    except FixtureIntegrityError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    try:
        text = Path(args.query).read_text(encoding="utf-8")
    except OSError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    try:
        query = parse_select(text)
    except QueryError as exc:
        return _fail(EXIT_QUERY, str(exc))
    if args.seeds:
        seeds = [s.strip() for s in args.seeds.split(",") if s.strip()]
    else:
        seeds = seeds_from_query_text(text) or net.seeds
    engine = TraversalEngine(net, ReachabilityMode(args.mode), workers=args.workers,
                             timeout_ms=args.timeout_ms)
    try:
        results, metrics = engine.execute(query, seeds)
    except (ConfigurationError, TraversalError) as exc:
        return _fail(EXIT_CONFIG, str(exc))
    names = query.projected()
    if args.json:
        print(json.dumps({
            "results": [{v: mu[v].n3() for v in names if v in mu} for mu in results],
            "resultsDigest": results_digest(results),
            "metrics": metrics.to_dict(),
        }, indent=2, sort_keys=True))
    else:
        for mu in results:
            print(solution_line(mu, names))
        print(json.dumps(metrics.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_suite(args) -> int:
    try:
        net = load_fixture(args.fixture)
    except FixtureIntegrityError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    queries = load_queries(args.queries) if Path(args.queries).is_dir() else []
    if not queries:
        return _fail(EXIT_CONFIG, f"no .rq files in {args.queries}")
    try:
        cases = make_cases(queries, net.seeds)
    except QueryError as exc:
        return _fail(EXIT_QUERY, str(exc))
    try:
        report = run_suite(net, cases, repeat=args.repeat, workers=args.workers, timeout_ms=args.timeout_ms)
    except (ConfigurationError, TraversalError) as exc:
        return _fail(EXIT_CONFIG, str(exc))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_csv(), encoding="utf-8", newline="\n")
    out.with_suffix(".json").write_text(report.to_json(), encoding="utf-8", newline="\n")
    if args.json:
        print(report.to_json(), end="")
    else:
        print(report.to_csv(), end="")
    if report.mismatches or report.unstable:
        problems = report.mismatches + [f"unstable:{u}" for u in report.unstable]
        return _fail(EXIT_MISMATCH, "results differ across modes for: " + ", ".join(problems))
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        net = load_fixture(args.fixture)
    except FixtureIntegrityError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    check = check_network(net)
    if args.json:
        print(json.dumps({"ok": check.ok, "documentsValidated": check.documents_validated,
                          "failures": check.failures()}, indent=2))
    else:
        print(f"{check.documents_validated} claimed documents validated; "
              f"{'ok' if check.ok else 'FAILED'}")
        for line in check.failures():
            print("  " + line)
    return EXIT_OK if check.ok else EXIT_MISMATCH


COMMANDS = {"generate": cmd_generate, "query": cmd_query, "suite": cmd_suite, "check": cmd_check}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        return _fail(EXIT_CONFIG, "--workers must be >= 1")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
