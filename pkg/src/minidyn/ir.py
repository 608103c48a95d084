"""SSA IR: instruction set, CFG utilities, liveness, validation and text format.

SSA values are plain strings (printed with a ``%`` sigil).  Immediate
operands are wrapped in :class:`Imm`.  Every block holds phis, straight-line
instructions and exactly one terminator.  Terminators that define a value
(checked arithmetic and calls) define it only on their first successor edge.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional

from .values import CONSTS, JSConst, TAG_BY_TEST, TypeTag, tag_of

# -- opcode tables -----------------------------------------------------------

TAG_TESTS = frozenset(TAG_BY_TEST)

# checked int32 arithmetic: successors (normal, failure)
CHECKED_OPS = frozenset({"add_i32_ovf", "sub_i32_ovf", "mul_i32_ovf", "div_i32_chk", "mod_i32_chk"})

# two-way value branches that are not type tests
COND_BRANCHES = frozenset({
    "br_lt_i32", "br_le_i32", "br_eq_i32",
    "br_lt_f64", "br_le_f64", "br_eq_f64",
    "br_eq_ref", "br_true", "br_nz_i32", "br_nz_f64", "br_nonempty_str",
})

# operator-level branches and calls produced by lowering, removed by inlining
PRIM_BRANCHES = frozenset({"prim_lt", "prim_le", "prim_eq", "prim_truthy"})

TERMINATORS = (
    frozenset({"jump", "ret", "throw", "call", "prim_call"})
    | TAG_TESTS | CHECKED_OPS | COND_BRANCHES | PRIM_BRANCHES
)

# operator-level instructions produced by lowering, removed by inlining
PRIM_OPS = frozenset({
    "prim_add", "prim_sub", "prim_mul", "prim_div", "prim_mod",
    "prim_and", "prim_or", "prim_xor", "prim_shl", "prim_shr", "prim_neg",
    "prim_get", "prim_put", "prim_index_get", "prim_index_put",
})

# Result tag of each value-producing low-level op; None means statically unknown.
RESULT_TAGS = {
    "add_f64": TypeTag.FLOAT64, "sub_f64": TypeTag.FLOAT64, "mul_f64": TypeTag.FLOAT64,
    "div_f64": TypeTag.FLOAT64, "mod_f64": TypeTag.FLOAT64, "neg_f64": TypeTag.FLOAT64,
    "i32_to_f64": TypeTag.FLOAT64, "f64_to_i32": TypeTag.INT32,
    "and_i32": TypeTag.INT32, "or_i32": TypeTag.INT32, "xor_i32": TypeTag.INT32,
    "shl_i32": TypeTag.INT32, "shr_i32": TypeTag.INT32,
    "to_string": TypeTag.STRING, "strcat": TypeTag.STRING,
    "arr_len": TypeTag.INT32, "str_len": TypeTag.INT32,
    "new_object": TypeTag.OBJECT, "new_array": TypeTag.ARRAY,
    "make_closure": TypeTag.CLOSURE, "cell_new": TypeTag.OBJECT, "closure_env": TypeTag.OBJECT,
    "obj_get": None, "arr_get": None, "str_char": None,
    "global_get": None, "cell_get": None,
    "prim_add": None, "prim_sub": None, "prim_mul": None, "prim_div": None,
    "prim_mod": None, "prim_and": None, "prim_or": None, "prim_xor": None,
    "prim_shl": None, "prim_shr": None, "prim_neg": None,
    "prim_get": None, "prim_index_get": None,
}
for _op in CHECKED_OPS:
    RESULT_TAGS[_op] = TypeTag.INT32
RESULT_TAGS["call"] = None
RESULT_TAGS["prim_call"] = None

EFFECT_OPS = frozenset({"global_put", "obj_put", "arr_put", "cell_set", "prim_put", "prim_index_put"})

INSTR_OPS = frozenset(RESULT_TAGS) - TERMINATORS | EFFECT_OPS

ARITY = {
    "add_f64": 2, "sub_f64": 2, "mul_f64": 2, "div_f64": 2, "mod_f64": 2, "neg_f64": 1,
    "i32_to_f64": 1, "f64_to_i32": 1, "and_i32": 2, "or_i32": 2, "xor_i32": 2,
    "shl_i32": 2, "shr_i32": 2, "to_string": 1, "strcat": 2, "arr_len": 1, "str_len": 1,
    "obj_get": 2, "arr_get": 2, "str_char": 2, "global_get": 0, "global_put": 1,
    "obj_put": 3, "arr_put": 3, "cell_new": 1, "cell_get": 1, "cell_set": 2,
    "closure_env": 0,
}


# -- data structures ---------------------------------------------------------


@dataclass(frozen=True)
class Imm:
    """An immediate constant operand."""

    value: object

    @property
    def tag(self) -> TypeTag:
        return tag_of(self.value)

    def __repr__(self):
        return format_imm(self.value)


def is_var(x) -> bool:
    return type(x) is str


@dataclass(eq=False)
class Instr:
    op: str
    args: list = field(default_factory=list)
    dest: Optional[str] = None
    attr: Optional[str] = None
    targets: list = field(default_factory=list)

    @property
    def is_terminator(self) -> bool:
        return self.op in TERMINATORS

    def uses(self):
        return [a for a in self.args if is_var(a)]

    def __repr__(self):
        return format_instr(self)


@dataclass(eq=False)
class Phi:
    dest: str
    incoming: dict  # pred block id -> operand

    def __repr__(self):
        return format_phi(self)


@dataclass(eq=False)
class Block:
    id: str
    phis: list = field(default_factory=list)
    instrs: list = field(default_factory=list)
    term: Optional[Instr] = None

    @property
    def succs(self) -> list:
        return list(self.term.targets) if self.term else []


@dataclass(eq=False)
class IrFunction:
    name: str
    params: list
    entry: str
    blocks: dict = field(default_factory=dict)  # id -> Block, in layout order
    nfree: int = 0  # number of captured cells in the closure environment

    def block(self, bid) -> Block:
        return self.blocks[bid]

    def preds(self) -> dict:
        p = {b: [] for b in self.blocks}
        for b in self.blocks.values():
            for s in b.succs:
                p[s].append(b.id)
        return p

    def values(self) -> set:
        """All SSA values defined in the function."""
        out = set(self.params)
        for b in self.blocks.values():
            out.update(ph.dest for ph in b.phis)
            out.update(i.dest for i in b.instrs if i.dest)
            if b.term and b.term.dest:
                out.add(b.term.dest)
        return out


@dataclass(eq=False)
class IrProgram:
    functions: dict  # name -> IrFunction
    main: str  # name of the top-level code function

    def copy(self) -> "IrProgram":
        """Structural copy (immediates are immutable and shared)."""

        def cp_instr(i):
            return Instr(i.op, list(i.args), i.dest, i.attr, list(i.targets))

        fns = {}
        for name, fn in self.functions.items():
            blocks = {
                bid: Block(bid, [Phi(ph.dest, dict(ph.incoming)) for ph in b.phis],
                           [cp_instr(i) for i in b.instrs], cp_instr(b.term) if b.term else None)
                for bid, b in fn.blocks.items()
            }
            fns[name] = IrFunction(fn.name, list(fn.params), fn.entry, blocks, fn.nfree)
        return IrProgram(fns, self.main)


# -- CFG utilities -----------------------------------------------------------


def reverse_postorder(fn: IrFunction) -> list:
    seen, order = set(), []
    stack = [(fn.entry, iter(fn.blocks[fn.entry].succs))]
    seen.add(fn.entry)
    while stack:
        bid, it = stack[-1]
        for s in it:
            if s not in seen:
                seen.add(s)
                stack.append((s, iter(fn.blocks[s].succs)))
                break
        else:
            stack.pop()
            order.append(bid)
    order.reverse()
    return order


def dominators(fn: IrFunction) -> dict:
    """Immediate dominators (Cooper, Harvey & Kennedy).  Unreachable blocks are absent."""
    rpo = reverse_postorder(fn)
    index = {b: i for i, b in enumerate(rpo)}
    preds = fn.preds()
    idom = {fn.entry: fn.entry}

    def intersect(a, b):
        while a != b:
            while index[a] > index[b]:
                a = idom[a]
            while index[b] > index[a]:
                b = idom[b]
        return a

    changed = True
    while changed:
        changed = False
        for b in rpo[1:]:
            ps = [p for p in preds[b] if p in idom]
            new = ps[0]
            for p in ps[1:]:
                new = intersect(p, new)
            if idom.get(b) != new:
                idom[b] = new
                changed = True
    return idom


def dominates(idom: dict, a: str, b: str) -> bool:
    while True:
        if a == b:
            return True
        parent = idom[b]
        if parent == b:
            return False
        b = parent


def edge_defs(fn: IrFunction, pred: str, succ: str) -> list:
    """Values defined on the edge pred->succ by a value-defining terminator."""
    t = fn.blocks[pred].term
    if t.dest and t.targets and t.targets[0] == succ:
        return [t.dest]
    return []


# -- liveness ----------------------------------------------------------------


@dataclass
class LivenessInfo:
    """Values live at each block entry, after the block's phis have been assigned."""

    live_in: dict
    live_out: dict

    def at_entry(self, bid) -> frozenset:
        return self.live_in[bid]


def _block_gen_kill(b: Block):
    gen, kill = set(), set()
    for ins in b.instrs:
        for u in ins.uses():
            if u not in kill:
                gen.add(u)
        if ins.dest:
            kill.add(ins.dest)
    if b.term:
        for u in b.term.uses():
            if u not in kill:
                gen.add(u)
    return gen, kill


def edge_live(fn: IrFunction, live_in: dict, pred: str, succ: str) -> set:
    """Values that must be live at the end of ``pred`` for the edge to ``succ``."""
    sb = fn.blocks[succ]
    phi_dests = {ph.dest for ph in sb.phis}
    out = set(live_in[succ]) - phi_dests
    out.difference_update(edge_defs(fn, pred, succ))
    for ph in sb.phis:
        v = ph.incoming.get(pred)
        if is_var(v):
            out.add(v)
    return out


def liveness(fn: IrFunction) -> LivenessInfo:
    """Backward liveness fixed point over the CFG (worklist, postorder first)."""
    info = {bid: _block_gen_kill(b) for bid, b in fn.blocks.items()}
    live_in = {bid: frozenset() for bid in fn.blocks}
    live_out = {bid: frozenset() for bid in fn.blocks}
    preds = fn.preds()
    # per edge: values it kills (successor phis, terminator result) and phi operands it reads
    edges = {}
    for bid, b in fn.blocks.items():
        es = []
        for succ in dict.fromkeys(b.succs):
            sb = fn.blocks[succ]
            kill = {ph.dest for ph in sb.phis}
            kill.update(edge_defs(fn, bid, succ))
            uses = {v for ph in sb.phis if is_var(v := ph.incoming.get(bid))}
            es.append((succ, kill, uses))
        edges[bid] = es
    rpo = reverse_postorder(fn)
    reach = set(rpo)
    work = [b for b in fn.blocks if b not in reach] + rpo  # pop() visits postorder
    pending = set(work)
    while work:
        bid = work.pop()
        pending.discard(bid)
        out = set()
        for succ, kill, uses in edges[bid]:
            out |= live_in[succ] - kill
            out |= uses
        gen, kill = info[bid]
        new_in = frozenset(gen | (out - kill))
        live_out[bid] = frozenset(out)
        if new_in != live_in[bid]:
            live_in[bid] = new_in
            for p in preds[bid]:
                if p not in pending:
                    pending.add(p)
                    work.append(p)
    return LivenessInfo(live_in, live_out)


# -- validation --------------------------------------------------------------


def validate(fn: IrFunction) -> list:
    """Return a list of diagnostics; empty iff the function is well formed."""
    diags = []
    if fn.entry not in fn.blocks:
        return [f"{fn.name}: entry block {fn.entry} missing"]
    preds = fn.preds()
    if preds[fn.entry]:
        diags.append(f"{fn.name}: entry block has predecessors")

    for b in fn.blocks.values():
        if b.term is None:
            diags.append(f"{b.id}: missing terminator")
            continue
        if not b.term.is_terminator:
            diags.append(f"{b.id}: block ends in non-terminator {b.term.op}")
        for ins in b.instrs:
            if ins.is_terminator:
                diags.append(f"{b.id}: terminator {ins.op} in instruction list")
        t = b.term
        for s in t.targets:
            if s not in fn.blocks:
                diags.append(f"{b.id}: unknown successor {s}")
        want = _successor_count(t.op)
        if want is not None and len(t.targets) != want:
            diags.append(f"{b.id}: {t.op} needs {want} successors, has {len(t.targets)}")
        if t.op in TAG_TESTS and len(t.args) != 1:
            diags.append(f"{b.id}: {t.op} takes one operand")
        if t.dest and t.targets:
            normal = t.targets[0]
            if normal in fn.blocks and preds[normal] != [b.id]:
                diags.append(f"{b.id}: normal successor {normal} of {t.op} must have it as sole predecessor")
        if len(set(t.targets)) != len(t.targets):
            for s in set(t.targets):
                if s in fn.blocks and fn.blocks[s].phis:
                    diags.append(f"{b.id}: duplicate edge into {s} which has phis")
        for ph in b.phis:
            if set(ph.incoming) != set(preds[b.id]):
                diags.append(
                    f"{b.id}: phi %{ph.dest} incoming {sorted(ph.incoming)} != preds {sorted(preds[b.id])}"
                )
    if diags:
        return diags
    return diags + _check_ssa(fn, preds)


def _successor_count(op):
    if op in ("ret", "throw"):
        return 0
    if op in ("jump", "call", "prim_call"):
        return 1
    if op in TAG_TESTS or op in CHECKED_OPS or op in COND_BRANCHES or op in PRIM_BRANCHES:
        return 2
    return None


def _check_ssa(fn: IrFunction, preds) -> list:
    diags = []
    defs = {}  # value -> (block, index); index -3 param, -2 edge def, -1 phi

    def define(v, where):
        if v in defs:
            diags.append(f"%{v} defined more than once")
        defs[v] = where

    for p in fn.params:
        define(p, (fn.entry, -3))
    for b in fn.blocks.values():
        for ph in b.phis:
            define(ph.dest, (b.id, -1))
        for i, ins in enumerate(b.instrs):
            if ins.dest:
                define(ins.dest, (b.id, i))
        if b.term.dest:
            if b.term.targets:
                define(b.term.dest, (b.term.targets[0], -2))
            else:
                diags.append(f"{b.id}: {b.term.op} defines a value without a successor")
    idom = dominators(fn)

    def check(v, bid, index, what):
        if v not in defs:
            diags.append(f"{bid}: {what} uses undefined %{v}")
            return
        db, di = defs[v]
        if bid not in idom:
            return  # unreachable code is not checked
        if db not in idom:
            diags.append(f"{bid}: {what} uses %{v} defined in unreachable code")
        elif db == bid:
            if di >= index:
                diags.append(f"{bid}: {what} uses %{v} before its definition")
        elif not dominates(idom, db, bid):
            diags.append(f"{bid}: {what} uses %{v} whose definition does not dominate it")

    for b in fn.blocks.values():
        for i, ins in enumerate(b.instrs):
            for u in ins.uses():
                check(u, b.id, i, ins.op)
        for u in b.term.uses():
            check(u, b.id, len(b.instrs), b.term.op)
        for ph in b.phis:
            for p, v in ph.incoming.items():
                if is_var(v):
                    if defs.get(v, (None, 0))[1] == -2 and defs[v][0] == b.id:
                        diags.append(f"{b.id}: phi uses edge-defined %{v} of its own block")
                        continue
                    check(v, p, len(fn.blocks[p].instrs) + 1, f"phi %{ph.dest}")
    return diags


# -- text format -------------------------------------------------------------


def format_imm(v) -> str:
    t = type(v)
    if t is JSConst:
        return v.name
    if t is str:
        return json.dumps(v)
    return repr(v)


def format_operand(a) -> str:
    return f"%{a}" if is_var(a) else format_imm(a.value)


def format_instr(ins: Instr) -> str:
    parts = []
    if ins.dest:
        parts.append(f"%{ins.dest} =")
    parts.append(ins.op)
    if ins.attr is not None:
        parts.append(f"@{ins.attr}")
    if ins.args:
        parts.append(", ".join(format_operand(a) for a in ins.args))
    s = " ".join(parts)
    if ins.targets:
        if ins.op in ("jump", "call", "prim_call"):
            s += " -> " + ins.targets[0]
        else:
            s += f" ? {ins.targets[0]} : {ins.targets[1]}"
    return s


def format_phi(ph: Phi) -> str:
    inc = " ".join(f"[{p}: {format_operand(v)}]" for p, v in ph.incoming.items())
    return f"%{ph.dest} = phi {inc}"


def dump_function(fn: IrFunction) -> str:
    params = ", ".join(f"%{p}" for p in fn.params)
    lines = [f"function {fn.name}({params}) entry {fn.entry} free {fn.nfree}"]
    for b in fn.blocks.values():
        lines.append("")
        lines.append(f"{b.id}:")
        for ph in b.phis:
            lines.append("  " + format_phi(ph))
        for ins in b.instrs:
            lines.append("  " + format_instr(ins))
        if b.term:
            lines.append("  " + format_instr(b.term))
    return "\n".join(lines) + "\n"


def dump_ir(prog: IrProgram) -> str:
    out = [f"program main {prog.main}\n"]
    for fn in prog.functions.values():
        out.append("\n" + dump_function(fn))
    return "".join(out)


class IrParseError(Exception):
    pass


_OPERAND_RE = re.compile(
    r'\s*(%[^\s,\]\)]+|"(?:[^"\\]|\\.)*"|-?inf|nan|[-+]?[0-9][0-9.eE+\-]*|[A-Za-z_]+)\s*'
)


def _parse_operand(text: str):
    text = text.strip()
    if text.startswith("%"):
        return text[1:]
    if text.startswith('"'):
        return Imm(json.loads(text))
    if text in CONSTS:
        return Imm(CONSTS[text])
    if text in ("inf", "-inf", "nan"):
        return Imm(float(text))
    if re.fullmatch(r"[-+]?\d+", text):
        return Imm(int(text))
    try:
        return Imm(float(text))
    except ValueError:
        raise IrParseError(f"bad operand {text!r}") from None


def _split_operands(text: str) -> list:
    out, pos = [], 0
    text = text.strip()
    if not text:
        return out
    while pos < len(text):
        m = _OPERAND_RE.match(text, pos)
        if not m:
            raise IrParseError(f"bad operand list {text!r}")
        out.append(_parse_operand(m.group(1)))
        pos = m.end()
        if pos < len(text):
            if text[pos] != ",":
                raise IrParseError(f"expected ',' in {text!r}")
            pos += 1
    return out


_INSTR_RE = re.compile(
    r"^(?:%(?P<dest>\S+) = )?(?P<op>[a-z_0-9]+)(?: @(?P<attr>\S+))?(?P<rest>.*)$"
)
_PHI_RE = re.compile(r"^%(?P<dest>\S+) = phi(?P<rest>.*)$")
_INC_RE = re.compile(r'\[(\w+): ((?:"(?:[^"\\]|\\.)*"|[^\]])+)\]')


def parse_instr(line: str) -> Instr:
    m = _INSTR_RE.match(line.strip())
    if not m:
        raise IrParseError(f"bad instruction {line!r}")
    rest = m.group("rest")
    targets = []
    tm = re.search(r' -> (\w+)$', rest)
    if tm:
        targets = [tm.group(1)]
        rest = rest[: tm.start()]
    else:
        tm = re.search(r' \? (\w+) : (\w+)$', rest)
        if tm:
            targets = [tm.group(1), tm.group(2)]
            rest = rest[: tm.start()]
    return Instr(m.group("op"), _split_operands(rest), m.group("dest"), m.group("attr"), targets)


def parse_ir(text: str) -> IrProgram:
    functions = {}
    main = None
    fn = None
    block = None
    for raw in text.splitlines():
        line = raw.rstrip()
        if not line.strip():
            continue
        if line.startswith("program main "):
            main = line.split()[2]
        elif line.startswith("function "):
            m = re.match(r"function (\S+)\((.*)\) entry (\w+) free (\d+)$", line)
            if not m:
                raise IrParseError(f"bad function header {line!r}")
            params = [p.strip()[1:] for p in m.group(2).split(",") if p.strip()]
            fn = IrFunction(m.group(1), params, m.group(3), nfree=int(m.group(4)))
            functions[fn.name] = fn
            block = None
        elif re.fullmatch(r"\w+:", line):
            if fn is None:
                raise IrParseError("block outside function")
            block = Block(line[:-1])
            fn.blocks[block.id] = block
        else:
            if block is None:
                raise IrParseError(f"instruction outside block: {line!r}")
            s = line.strip()
            pm = _PHI_RE.match(s)
            if pm:
                inc = {p: _parse_operand(v) for p, v in _INC_RE.findall(pm.group("rest"))}
                block.phis.append(Phi(pm.group("dest"), inc))
                continue
            ins = parse_instr(s)
            if block.term is not None:
                raise IrParseError(f"{block.id}: instruction after terminator")
            if ins.is_terminator:
                block.term = ins
            else:
                block.instrs.append(ins)
    if main is None:
        raise IrParseError("missing program header")
    return IrProgram(functions, main)


def isomorphic(a: IrFunction, b: IrFunction) -> bool:
    """Structural equality of two functions up to their textual form."""
    return dump_function(a) == dump_function(b)
