"""Basic block versioning.

A block version is a copy of an IR block specialized for a typing context: a
map from SSA values live at block entry to a known type tag (values missing
from the map are unknown).  Type tests whose operand tag is known in the
current context are folded into jumps.

Lazy mode compiles versions on demand.  Unconditional transfers to new
versions are compiled in-line ("chain form"); other branch arms get stubs
that are compiled when first executed.  Eager mode compiles every version
reachable from a function entry with a FIFO worklist before running it.

``maxvers`` bounds the number of non-generic versions per block (INF for no
limit).  When the limit is hit, a request falls back to the compatible
version with the lowest :func:`context_comp` score, or else to the generic
version (all values unknown), which does not count against the limit.
"""

from __future__ import annotations

import math
import weakref
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .codebuf import (
    LOWLEVEL, Call, Checked, CondBr, Compute, Enter, Jump, Move, Ret, Stub, TagTest, Throw,
    TracedTagTest,
)
from .ir import (
    CHECKED_OPS, COND_BRANCHES, RESULT_TAGS, TAG_TESTS, Imm, IrFunction, is_var, liveness,
)
from .values import TAG_BY_TEST, UNDEFINED, Closure, tag_of

INF = math.inf


def parse_limit(text) -> float:
    """Parse a version limit: a non-negative integer or ``inf``."""
    if isinstance(text, (int, float)):
        n = text
    elif str(text).lower() in ("inf", "infinity", "∞"):
        return INF
    else:
        n = int(text)
    if n < 0:
        raise ValueError("version limit must be >= 0")
    return n if n == INF else int(n)


def format_limit(n) -> str:
    return "inf" if n == INF else str(int(n))


@dataclass(frozen=True)
class TypingContext:
    """Known tags of live values, as a sorted tuple of (value, tag) pairs."""

    types: tuple = ()

    @staticmethod
    def of(mapping) -> "TypingContext":
        return TypingContext(tuple(sorted((k, t) for k, t in mapping.items() if t is not None)))

    def as_dict(self) -> dict:
        return dict(self.types)

    def get(self, v):
        for k, t in self.types:
            if k == v:
                return t
        return None

    @property
    def generic(self) -> bool:
        return not self.types

    def __str__(self):
        return "{" + ", ".join(f"{k}:{t.value}" for k, t in self.types) + "}"


GENERIC = TypingContext()


def context_comp(pred: TypingContext, succ: TypingContext) -> float:
    """Cost of using a version for ``succ`` when ``pred`` is the actual context.

    Both contexts are over the same live set.  Losing a known tag costs 1;
    any disagreement where ``succ`` claims a tag makes them incompatible (INF).
    """
    p, s = pred.as_dict(), succ.as_dict()
    score = 0
    for v, t in s.items():
        if p.get(v) != t:
            return INF
    for v in p:
        if v not in s:
            score += 1
    return score


@dataclass(eq=False)
class BlockVersion:
    fs: "FnState"
    block: str
    ctx: TypingContext
    seq: int
    start: Optional[int] = None  # code offset once compiled
    executed: bool = False

    @property
    def generic(self) -> bool:
        return self.ctx.generic

    def label(self) -> str:
        return f"{self.fs.fn.name}:{self.block}#{self.seq}"


@dataclass(eq=False)
class BranchSite:
    """Layout metadata of a two-armed branch, filled in as its arms are resolved."""

    fallthrough: Optional[int] = None  # arm laid out as the fall-through (first resolved)
    inverted: bool = False  # the true arm falls through, so the condition is inverted


@dataclass
class _Layout:
    slots: dict
    template: list
    param_slots: list
    live: dict  # bid -> live-in values, sorted
    edges: dict = field(default_factory=dict)  # (pred, succ) -> (phi operands, moves), filled lazily


# Static per-function layout, shared by every VM running the same IR function
# (functions are not mutated once handed to a VM).
_LAYOUTS: "weakref.WeakKeyDictionary[IrFunction, _Layout]" = weakref.WeakKeyDictionary()


def _layout(fn: IrFunction) -> _Layout:
    lay = _LAYOUTS.get(fn)
    if lay is not None:
        return lay
    slots, template = {}, []

    def slot(key, init):
        if key not in slots:
            slots[key] = len(template)
            template.append(init)

    for p in fn.params:
        slot(p, UNDEFINED)
    for blk in fn.blocks.values():
        for ins in list(blk.instrs) + [blk.term]:
            for a in ins.args:
                if isinstance(a, Imm):
                    slot(_imm_key(a), a.value)
            if ins.dest:
                slot(ins.dest, UNDEFINED)
        for ph in blk.phis:
            slot(ph.dest, UNDEFINED)
            for a in ph.incoming.values():
                if isinstance(a, Imm):
                    slot(_imm_key(a), a.value)
    live = {bid: tuple(sorted(s)) for bid, s in liveness(fn).live_in.items()}
    lay = _Layout(slots, template, [slots[p] for p in fn.params], live)
    _LAYOUTS[fn] = lay
    return lay


class FnState:
    """Per-function compilation state: register layout, liveness, versions."""

    def __init__(self, fn: IrFunction):
        self.fn = fn
        lay = _layout(fn)
        self.slots = lay.slots
        self.template = lay.template
        self.param_slots = lay.param_slots
        self.live = lay.live
        self.edges = lay.edges
        self.versions = {bid: [] for bid in fn.blocks}  # bid -> [BlockVersion] in creation order
        self.nongeneric = dict.fromkeys(fn.blocks, 0)
        self.by_ctx = {}  # (bid, ctx) -> BlockVersion
        self.entry_version = None
        self.compiled_eagerly = False

    def reg(self, operand) -> int:
        return self.slots[_imm_key(operand) if isinstance(operand, Imm) else operand]

    def nongeneric_count(self, bid) -> int:
        return self.nongeneric[bid]


def _imm_key(imm: Imm):
    v = imm.value
    return ("imm", type(v).__name__, repr(v))


def operand_tag(operand, ctx: dict):
    if isinstance(operand, Imm):
        return tag_of(operand.value)
    return ctx.get(operand)


class Engine:
    """Compiles block versions into the VM code buffer."""

    def __init__(self, vm, maxvers=INF, eager=False):
        self.vm = vm
        self.maxvers = maxvers
        self.eager = eager
        self.seq = 0
        self.sites = []

    # -- version lookup --

    def request_version(self, fs: FnState, bid: str, ctx: TypingContext):
        """Return (version, created) for a request to run ``bid`` under ``ctx``."""
        v = fs.by_ctx.get((bid, ctx))
        if v is not None:
            return v, False
        if ctx.generic or fs.nongeneric[bid] < self.maxvers:
            return self._new_version(fs, bid, ctx), True
        best, best_key = None, None
        for cand in fs.versions[bid]:
            score = context_comp(ctx, cand.ctx)
            if score == INF:
                continue
            key = (score, cand.seq)
            if best_key is None or key < best_key:
                best, best_key = cand, key
        if best is not None:
            return best, False
        return self.request_version(fs, bid, GENERIC)

    def _new_version(self, fs, bid, ctx) -> BlockVersion:
        v = BlockVersion(fs, bid, ctx, self.seq)
        self.seq += 1
        fs.versions[bid].append(v)
        if not ctx.generic:
            fs.nongeneric[bid] += 1
        fs.by_ctx[(bid, ctx)] = v
        return v

    # -- entry points --

    def entry_pc(self, fs: FnState) -> int:
        if fs.entry_version is None:
            self.vm.compiler_invocations += 1
            v, _ = self.request_version(fs, fs.fn.entry, GENERIC)
            fs.entry_version = v
            if self.eager:
                self.compile_eager(fs, v)
            else:
                self.compile_chain(fs, v)
        return fs.entry_version.start

    def on_stub_hit(self, stub: Stub, pc: int) -> int:
        vm = self.vm
        vm.stub_hits += 1
        vm.compiler_invocations += 1
        v, _ = self.request_version(stub.fs, stub.block, stub.ctx)
        if v.start is None:
            self.compile_chain(stub.fs, v)
        site = stub.site
        site.targets[stub.arm] = v.start
        info = site.meta
        if info is not None and info.fallthrough is None:
            # the first resolved arm becomes the fall-through; taken-on-true
            # branches whose true arm resolves first are inverted
            info.fallthrough = stub.arm
            info.inverted = stub.arm == 0
        return v.start

    # -- code emission --

    def emit(self, op):
        vm = self.vm
        vm.code.append(op)
        if op.counted:
            vm.ops_emitted += 1
        return op

    def compile_chain(self, fs: FnState, version: BlockVersion):
        """Lazily compile ``version`` plus any versions it transfers to unconditionally."""
        stubs = []
        v = version
        while v is not None:
            v.start = len(self.vm.code)
            self.emit(Enter(v))
            v = self._compile_body(fs, v, stubs)
        for site, arm, succ, ctx in stubs:
            site.targets[arm] = len(self.vm.code)
            self.emit(Stub(site, arm, fs, succ, ctx))

    def compile_eager(self, fs: FnState, entry: BlockVersion):
        """Compile every version reachable from ``entry`` (FIFO worklist)."""
        work = deque([entry])
        queued = {entry}
        patches = []
        while work:
            v = work.popleft()
            v.start = len(self.vm.code)
            self.emit(Enter(v))
            out = []
            nxt = self._compile_body(fs, v, out)
            if nxt is not None:
                out.append(("chain", nxt))
            for item in out:
                if item[0] == "chain":
                    target = item[1]
                    site, arm = self.emit(Jump()), 0
                else:
                    site, arm, succ, ctx = item
                    target, _ = self.request_version(fs, succ, ctx)
                patches.append((site, arm, target))
                if target.start is None and target not in queued:
                    queued.add(target)
                    work.append(target)
        for site, arm, target in patches:
            site.targets[arm] = target.start
        fs.compiled_eagerly = True

    def _edge(self, fs: FnState, pred: str, succ: str, ctx: dict):
        """Context and phi moves for the CFG edge pred->succ."""
        static = fs.edges.get((pred, succ))
        if static is None:
            phis = {ph.dest: ph.incoming[pred] for ph in fs.fn.blocks[succ].phis}
            moves = tuple((fs.reg(d), fs.reg(a)) for d, a in phis.items())
            static = fs.edges[(pred, succ)] = (phis, moves)
        phis, moves = static
        out = []
        for v in fs.live[succ]:  # sorted, so the pairs come out in context order
            t = operand_tag(phis[v], ctx) if v in phis else ctx.get(v)
            if t is not None:
                out.append((v, t))
        return TypingContext(tuple(out)), moves

    def _goto(self, fs, blk, ctx, succ, stubs):
        """Unconditional transfer; returns a new version to compile next, if any."""
        sctx, moves = self._edge(fs, blk.id, succ, ctx)
        if moves:
            self.emit(Move(moves))
        if self.eager:
            # emitted as an explicit jump by the eager driver
            stubs.append((self.emit(Jump()), 0, succ, sctx))
            return None
        v, created = self.request_version(fs, succ, sctx)
        if created:
            return v
        j = self.emit(Jump())
        j.targets[0] = v.start
        return None

    def _arm(self, fs, site, arm, blk, succ, ctx, stubs):
        sctx, moves = self._edge(fs, blk.id, succ, ctx)
        site.moves[arm] = moves
        if not self.eager:
            v = fs.by_ctx.get((succ, sctx))
            if v is not None and v.start is not None:
                site.targets[arm] = v.start
                return
        stubs.append((site, arm, succ, sctx))

    def _site(self, op):
        op.meta = BranchSite()
        self.sites.append(op)
        return op

    def _compile_body(self, fs: FnState, version: BlockVersion, stubs):
        vm = self.vm
        blk = fs.fn.blocks[version.block]
        ctx = version.ctx.as_dict()
        for ins in blk.instrs:
            dst = fs.reg(ins.dest) if ins.dest else None
            self.emit(Compute(ins.op, vm.op_impl(ins), dst, [fs.reg(a) for a in ins.args]))
            if ins.dest:
                t = RESULT_TAGS.get(ins.op)
                if t is None:
                    ctx.pop(ins.dest, None)
                else:
                    ctx[ins.dest] = t
        term = blk.term
        op = term.op
        if op == "jump":
            return self._goto(fs, blk, ctx, term.targets[0], stubs)
        if op in TAG_TESTS:
            x = term.args[0]
            tag = TAG_BY_TEST[op]
            known = operand_tag(x, ctx)
            if known is not None:
                succ = term.targets[0] if known == tag else term.targets[1]
                return self._goto(fs, blk, ctx, succ, stubs)
            cls = TracedTagTest if vm.test_log is not None else TagTest
            site = self._site(self.emit(cls(tag, fs.reg(x), (fs.fn.name, x))))
            self._arm(fs, site, 0, blk, term.targets[0], {**ctx, x: tag}, stubs)
            self._arm(fs, site, 1, blk, term.targets[1], ctx, stubs)
            return None
        if op in COND_BRANCHES:
            site = self._site(self.emit(CondBr(op, [fs.reg(a) for a in term.args])))
            for i, succ in enumerate(term.targets):
                self._arm(fs, site, i, blk, succ, ctx, stubs)
            return None
        if op in CHECKED_OPS:
            site = self._site(self.emit(Checked(op, fs.reg(term.dest), [fs.reg(a) for a in term.args])))
            self._arm(fs, site, 0, blk, term.targets[0], {**ctx, term.dest: RESULT_TAGS[op]}, stubs)
            self._arm(fs, site, 1, blk, term.targets[1], ctx, stubs)
            return None
        if op == "call":
            site = self._site(self.emit(Call(fs.reg(term.dest), [fs.reg(a) for a in term.args])))
            cctx = dict(ctx)
            cctx.pop(term.dest, None)
            self._arm(fs, site, 0, blk, term.targets[0], cctx, stubs)
            return None
        if op == "ret":
            self.emit(Ret(fs.reg(term.args[0])))
            return None
        if op == "throw":
            self.emit(Throw(term.args[0].value))
            return None
        raise ValueError(f"cannot compile terminator {op}")


def make_closure_impl(vm, name):
    def impl(*cells):
        return Closure(name, vm.fnstates[name], tuple(cells))

    return impl


__all__ = [
    "INF", "GENERIC", "TypingContext", "context_comp", "BlockVersion", "BranchSite",
    "FnState", "Engine", "parse_limit", "format_limit", "LOWLEVEL", "is_var",
]
