"""Command line entry point: ``lazyarr serve|bench|repl|report``."""
from __future__ import annotations

import argparse
import logging
import signal
import sys

from .client import Client, ClientConfig
from .server import DEFAULT_ELEMENT_BUDGET, DEFAULT_PORT, serve
from .transport import LocalTransport, SocketTransport

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_CONNECT = 3

OWN_QUERY_MESSAGES = 2

log = logging.getLogger("lazyarr")


def _global_args(parser, suppress=False):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--host", default=d("127.0.0.1"), help="server host")
    parser.add_argument("--port", type=int, default=d(DEFAULT_PORT), help="server port")
    parser.add_argument("--seed", type=int, default=d(0), help="seed for unseeded random arrays")


def _config_args(parser):
    parser.add_argument("--mode", choices=("base", "opt"), default="opt")
    for flag in ClientConfig.FLAGS:
        parser.add_argument(f"--{flag.replace('_', '-')}", dest=flag,
                            action=argparse.BooleanOptionalAction, default=None,
                            help=f"override the {flag} optimization")
    parser.add_argument("--buffer-cap", type=int, default=None)


def _config_from(args, mode=None) -> ClientConfig:
    mode = mode or args.mode
    cfg = ClientConfig.baseline() if mode == "base" else ClientConfig.optimized()
    cfg = ClientConfig.from_env(base=cfg)
    for flag in ClientConfig.FLAGS:
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, flag, value)
    if getattr(args, "buffer_cap", None) is not None:
        cfg.buffer_cap = args.buffer_cap
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lazyarr", description=__doc__)
    _global_args(p)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("serve", help="run an array server")
    _global_args(s, suppress=True)
    s.add_argument("--element-budget", type=int, default=DEFAULT_ELEMENT_BUDGET)
    s.add_argument("--log-level", default="INFO")

    b = sub.add_parser("bench", help="run one benchmark and print a JSON report")
    _global_args(b, suppress=True)
    b.add_argument("benchmark", choices=("tc-dense", "tc-sparse", "bc", "taxi"))
    b.add_argument("--input", required=True,
                   help="kn:N, path:N, star:N, gnp:N:P:SEED, rand:N:LO:HI:SEED or a .mtx file")
    _config_args(b)
    b.add_argument("--source", type=int, default=0, help="source vertex for bc")
    b.add_argument("--check-pair", action="store_true",
                   help="also run the other mode and require identical results")
    b.add_argument("--output", help="append the JSON report(s) to this file")
    b.add_argument("--remote", action="store_true", help="use the server at --host/--port")

    r = sub.add_parser("repl", help="interactive session")
    _global_args(r, suppress=True)
    _config_args(r)
    r.add_argument("--embedded", action="store_true", help="use a private in-process server")
    r.add_argument("--script", help="read statements from a file instead of stdin")

    rep = sub.add_parser("report", help="compare saved reports, or show live server stats")
    _global_args(rep, suppress=True)
    rep.add_argument("paths", nargs="*")
    return p


def _interrupt(signum, frame):
    raise KeyboardInterrupt


def cmd_serve(args) -> int:
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    signal.signal(signal.SIGTERM, _interrupt)
    try:
        serve(args.host, args.port, args.element_budget)
    except OSError as e:
        print(f"cannot listen on {args.host}:{args.port}: {e}", file=sys.stderr)
        return EXIT_CONNECT
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench.graphs import GraphFormatError
    from .bench.runner import results_equal, run_benchmark

    def transport():
        return SocketTransport(args.host, args.port) if args.remote else LocalTransport()

    modes = [args.mode] + ([{"base": "opt", "opt": "base"}[args.mode]] if args.check_pair else [])
    reports = []
    try:
        for mode in modes:
            reports.append(run_benchmark(args.benchmark, args.input, _config_from(args, mode),
                                         seed=args.seed, source=args.source, transport=transport()))
    except (GraphFormatError, FileNotFoundError) as e:
        print(f"bad input: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"connection error: {e}", file=sys.stderr)
        return EXIT_CONNECT

    # the paired run is only written to --output; stdout carries one report
    lines = [r.to_json() for r in reports]
    print(lines[0])
    if args.output:
        with open(args.output, "a") as fh:
            fh.write("\n".join(lines) + "\n")
    ok = all(r.oracle_match is not False for r in reports)
    if args.check_pair:
        ok = ok and results_equal(reports[0].result, reports[1].result)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_repl(args) -> int:
    from .repl import Repl

    try:
        transport = LocalTransport() if args.embedded else SocketTransport(args.host, args.port)
    except OSError as e:
        print(f"connection error: {e}", file=sys.stderr)
        return EXIT_CONNECT
    with Client(transport, config=_config_from(args), name="repl", seed=args.seed) as client:
        repl = Repl(client, sys.stdout)
        try:
            if args.script:
                with open(args.script) as fh:
                    repl.run(fh)
            else:
                repl.run(sys.stdin, prompt=">>> " if sys.stdin.isatty() else "")
        except (OSError, ConnectionError) as e:
            print(f"connection error: {e}", file=sys.stderr)
            return EXIT_CONNECT
    return EXIT_OK


def cmd_report(args) -> int:
    from .bench.report import ReportFormatError, format_table, load_reports

    if not args.paths:
        try:
            with Client.connect(args.host, args.port, name="report") as client:
                stats = client.server_stats()
        except OSError as e:
            print(f"connection error: {e}", file=sys.stderr)
            return EXIT_CONNECT
        # leave out the connect and stats requests this query itself made
        stats["messages_handled"] -= OWN_QUERY_MESSAGES
        print(f"server {args.host}:{args.port}")
        for key in ("messages_handled", "arrays_created", "arrays_deleted", "live_arrays"):
            print(f"  {key:<18}{stats.pop(key)}")
        print("timings in ns (these include parsing this query)")
        for key in sorted(stats):
            print(f"  {key:<18}{stats[key]}")
        return EXIT_OK
    try:
        print(format_table(load_reports(args.paths)))
    except (ReportFormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"serve": cmd_serve, "bench": cmd_bench, "repl": cmd_repl, "report": cmd_report}
    return handler[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
