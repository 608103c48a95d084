"""The execution engine: a code buffer, frames, counters and run modes."""

from __future__ import annotations

import json
from collections import Counter as _Counter
from dataclasses import asdict, dataclass, field

from .bbv import INF, Engine, FnState, make_closure_impl
from .codebuf import LOWLEVEL
from .ir import Instr, IrProgram
from .values import UNDEFINED, Closure, JSRuntimeError, TypeTag, display, to_string

MODES = ("baseline", "analysis", "bbv-lazy", "bbv-eager")

TEST_KEYS = tuple(t.test_name for t in TypeTag)

DEFAULT_FUEL = 50_000_000


class FuelExhausted(Exception):
    """Raised when a run exceeds its step budget."""


@dataclass
class Counters:
    tests: dict = field(default_factory=lambda: {k: 0 for k in TEST_KEYS})
    tests_total: int = 0
    ops_emitted: int = 0
    ops_executed: int = 0
    compiler_invocations: int = 0
    stub_hits: int = 0
    versions_histogram: dict = field(default_factory=dict)  # versions per block -> number of blocks

    def minus(self, other: "Counters") -> "Counters":
        """Difference of the dynamic counters (the histogram is kept from self)."""
        return Counters(
            {k: self.tests[k] - other.tests[k] for k in TEST_KEYS},
            self.tests_total - other.tests_total,
            self.ops_emitted - other.ops_emitted,
            self.ops_executed - other.ops_executed,
            self.compiler_invocations - other.compiler_invocations,
            self.stub_hits - other.stub_hits,
            dict(self.versions_histogram),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["versions_histogram"] = {str(k): v for k, v in sorted(self.versions_histogram.items())}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _native_print(vm, args):
    vm.output.append(" ".join(to_string(a) for a in args))
    return UNDEFINED


class VM:
    """Runs an inlined IR program in one of the execution modes.

    ``baseline`` compiles one generic version per block; ``analysis`` first
    applies the representation analysis, then compiles like baseline;
    ``bbv-lazy`` and ``bbv-eager`` version blocks up to ``maxvers`` times
    (with ``maxvers=0`` both behave exactly like ``baseline``).
    """

    def __init__(self, prog: IrProgram, mode="bbv-lazy", maxvers=INF, fuel=DEFAULT_FUEL, trace_tests=False):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        if mode == "analysis":
            from .analysis import analyze_program

            prog = analyze_program(prog, apply=True)
        if mode in ("baseline", "analysis"):
            maxvers = 0
        self.maxvers = maxvers
        self.prog = prog
        self.fuel = fuel
        self.code = []
        self.exec_order = []
        self.output = []
        self.globals = {"print": Closure("print", native=_native_print)}
        self.fnstates = {name: FnState(fn) for name, fn in prog.functions.items()}
        # maxvers=0 disables versioning, so eager mode degenerates to the baseline compiler
        self.engine = Engine(self, maxvers, eager=(mode == "bbv-eager" and maxvers != 0))
        self.regs = []
        self.closure = None
        self.stack = []
        self.result = None
        self.steps = 0
        self.tests = {t: 0 for t in TypeTag}
        self.ops_emitted = 0
        self.ops_executed = 0
        self.compiler_invocations = 0
        self.stub_hits = 0
        self.loaded = False
        # per (function, IR value) test counts, when tracing
        self.test_log = _Counter() if trace_tests else None

    # -- op implementations --

    def op_impl(self, ins: Instr):
        op, attr = ins.op, ins.attr
        if op in LOWLEVEL:
            return LOWLEVEL[op]
        g = self.globals
        if op == "global_get":
            return lambda: g.get(attr, UNDEFINED)
        if op == "global_put":
            return lambda v: g.__setitem__(attr, v)
        if op == "closure_env":
            i = int(attr)
            return lambda: self.closure.env[i]
        if op == "make_closure":
            return make_closure_impl(self, attr)
        raise ValueError(f"no implementation for {op}")

    # -- calls --

    def enter_function(self, clo: Closure, args, call_op) -> int:
        fs = clo.func
        pc = self.engine.entry_pc(fs)
        regs = fs.template[:]
        for slot, a in zip(fs.param_slots, args):
            regs[slot] = a
        self.stack.append((self.regs, call_op, self.closure))
        self.regs = regs
        self.closure = clo
        return pc

    def leave_function(self, value) -> int:
        regs, call_op, clo = self.stack.pop()
        self.regs, self.closure = regs, clo
        if call_op is None:
            self.result = value
            return -1
        regs[call_op.dst] = value
        return call_op.take(self, 0)

    def _execute(self, pc: int):
        code = self.code
        limit = self.fuel
        steps = self.steps
        depth = len(self.stack)
        try:
            while pc >= 0:
                pc = code[pc].step(self, pc)
                steps += 1
                if steps > limit:
                    raise FuelExhausted(f"step budget of {limit} exceeded")
        except BaseException:
            del self.stack[depth - 1 :]
            raise
        finally:
            self.steps = steps
        return self.result

    def call(self, clo: Closure, args=()):
        """Call a closure from the host and return its result."""
        if clo.native is not None:
            return clo.native(self, list(args))
        saved = (self.regs, self.closure)
        try:
            pc = self.enter_function(clo, list(args), None)
            return self._execute(pc)
        finally:
            self.regs, self.closure = saved

    def load(self):
        """Run the top-level code (defines globals)."""
        if not self.loaded:
            self.loaded = True
            fs = self.fnstates[self.prog.main]
            self.call(Closure(self.prog.main, fs, ()))
        return self

    def call_global(self, name: str, args=()):
        self.load()
        clo = self.globals.get(name)
        if not isinstance(clo, Closure):
            raise JSRuntimeError(f"TypeError: {name} is not a function")
        return self.call(clo, args)

    # -- statistics --

    def counters(self) -> Counters:
        hist = _Counter()
        for fs in self.fnstates.values():
            for vs in fs.versions.values():
                if vs:
                    hist[len(vs)] += 1
        return Counters(
            {t.test_name: n for t, n in self.tests.items()},
            sum(self.tests.values()),
            self.ops_emitted,
            self.ops_executed,
            self.compiler_invocations,
            self.stub_hits,
            dict(sorted(hist.items())),
        )

    def all_versions(self):
        for fs in self.fnstates.values():
            for vs in fs.versions.values():
                yield from vs

    def dump_code(self) -> str:
        return "\n".join(f"{i:5d}  {op.describe()}" for i, op in enumerate(self.code))


@dataclass
class RunResult:
    value: object = None
    error: str = None
    output: list = field(default_factory=list)
    counters: Counters = None

    def outcome(self):
        """Comparable summary: ('ok', display(value)) or ('error', message)."""
        if self.error is not None:
            return ("error", self.error)
        return ("ok", display(self.value))


def build(source: str):
    """Parse, lower and inline a MiniDyn source text into an IR program."""
    from .lower import lower
    from .parser import parse
    from .templates import inline_primitives

    return inline_primitives(lower(parse(source)))


def run(prog_or_source, mode="bbv-lazy", maxvers=INF, entry="main", args=(), fuel=DEFAULT_FUEL) -> RunResult:
    prog = build(prog_or_source) if isinstance(prog_or_source, str) else prog_or_source
    vm = VM(prog, mode, maxvers, fuel)
    res = RunResult(output=vm.output)
    try:
        vm.load()
        if entry is not None:
            res.value = vm.call_global(entry, args)
    except JSRuntimeError as e:
        res.error = str(e)
    res.counters = vm.counters()
    return res
