"""Command line interface: ``minidyn run`` and ``minidyn bench``.

Exit codes: 0 success, 1 runtime error, 2 compile error (syntax or lowering).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import values as V
from .bbv import parse_limit
from .harness import ExperimentConfig, emit_report, run_suite
from .ir import dump_ir
from .lower import LoweringError
from .parser import MiniDynSyntaxError, number_value
from .vm import MODES, VM, FuelExhausted, build

EXIT_OK, EXIT_RUNTIME, EXIT_COMPILE = 0, 1, 2


def parse_arg(text: str):
    """Entry-function argument: a number, a constant name, or else a string."""
    if text in V.CONSTS:
        return V.CONSTS[text]
    try:
        if text.startswith("-"):
            return V.prim_neg(number_value(text[1:]))
        return number_value(text)
    except (ValueError, OverflowError):
        return text


def cmd_run(args) -> int:
    try:
        src = Path(args.file).read_text()
        prog = build(src)
    except (MiniDynSyntaxError, LoweringError) as e:
        print(f"compile error: {e}", file=sys.stderr)
        return EXIT_COMPILE
    vm = VM(prog, args.mode, args.maxvers, fuel=args.fuel)
    if args.dump_ir:
        print(dump_ir(vm.prog))
    if args.dump_analysis:
        from .analysis import report

        for fn in prog.functions.values():
            print(report(fn))
    status = EXIT_OK
    try:
        vm.load()
        if args.entry:
            value = vm.call_global(args.entry, [parse_arg(a) for a in args.args])
            result = V.display(value)
    except (V.JSRuntimeError, FuelExhausted) as e:
        result = None
        print(f"runtime error: {e}", file=sys.stderr)
        status = EXIT_RUNTIME
    for line in vm.output:
        print(line)
    if status == EXIT_OK and args.entry:
        print(f"=> {result}")
    if args.stats:
        Path(args.stats).write_text(vm.counters().to_json() + "\n")
    return status


def cmd_bench(args) -> int:
    cfg = ExperimentConfig(
        programs=[args.suite],
        modes=tuple(args.modes.split(",")),
        limits=tuple(parse_limit(x) for x in args.limits.split(",")),
        warmup=args.warmup,
        iters=args.iters,
    )
    report = run_suite(cfg)
    for out in args.out:
        emit_report(report, out)
        print(f"wrote {out}")
    for b, m, lim, msg in report.failures:
        print(f"FAILED {b} {m} {lim}: {msg}", file=sys.stderr)
    return EXIT_OK if not report.failures else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="minidyn", description="MiniDyn VM with basic block versioning")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a program")
    r.add_argument("file")
    r.add_argument("--mode", choices=MODES, default="bbv-lazy")
    r.add_argument("--maxvers", type=parse_limit, default=parse_limit("inf"), help="version limit (N or inf)")
    r.add_argument("--stats", metavar="OUT.json", help="write counters as JSON")
    r.add_argument("--dump-ir", action="store_true", help="print the IR that gets compiled")
    r.add_argument("--dump-analysis", action="store_true", help="print the representation analysis")
    r.add_argument("--entry", default="main", help="global function to call after loading ('' for none)")
    r.add_argument("--args", nargs="*", default=[], help="arguments to the entry function")
    r.add_argument("--fuel", type=int, default=50_000_000, help="op execution budget")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="sweep modes and version limits over a benchmark suite")
    b.add_argument("--suite", default=None, help="directory of .js programs (default: bundled corpus)")
    b.add_argument("--modes", default=",".join(MODES))
    b.add_argument("--limits", default="0,1,2,5,inf")
    b.add_argument("--warmup", type=int, default=1)
    b.add_argument("--iters", type=int, default=1)
    b.add_argument("--out", nargs="+", default=["report.json"], help="report file(s): .json, .csv or .md")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if args.command == "bench" and args.suite is None:
        from .harness import corpus_dir

        args.suite = corpus_dir()
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
