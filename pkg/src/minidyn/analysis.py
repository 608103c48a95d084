"""Flow-based representation (type tag) analysis.

A sparse-conditional-constant-propagation style forward analysis whose
lattice elements are sets of type tags (the empty set is bottom, the set of
all seven tags is top).  States are kept per CFG edge so that type test
branches can narrow their operand: the true edge of ``is_T x`` sees
``x ∩ {T}``, the false edge ``x − {T}``.  Edges that cannot be taken are never
propagated.  At merge points states are joined by union.

Parameters, global reads, call results and property/element loads are top;
the normal edge of a checked int32 op yields ``{int32}``.

:func:`apply_analysis` replaces every decided type test by a jump and drops
the blocks that become unreachable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ir import (
    CHECKED_OPS, RESULT_TAGS, TAG_TESTS, Imm, Instr, IrFunction, IrProgram, liveness,
    reverse_postorder, validate,
)
from .lower import cleanup_ssa
from .templates import merge_blocks
from .values import ALL_TAGS, TAG_BY_TEST, TypeTag, tag_of

TOP = ALL_TAGS
BOTTOM = frozenset()

_ORDER = list(TypeTag)


def format_tags(s) -> str:
    if s == TOP:
        return "top"
    if not s:
        return "bottom"
    return "{" + ",".join(t.value for t in _ORDER if t in s) + "}"


def _result(op) -> frozenset:
    t = RESULT_TAGS.get(op)
    return TOP if t is None else frozenset({t})


def _tags(operand, state) -> frozenset:
    if isinstance(operand, Imm):
        return frozenset({tag_of(operand.value)})
    return state.get(operand, BOTTOM)


@dataclass
class AnalysisResult:
    fn: IrFunction
    block_in: dict = field(default_factory=dict)  # bid -> {value: tags} (reachable blocks only)
    edges: set = field(default_factory=set)  # executable (pred, succ) edges
    edge_state: dict = field(default_factory=dict)  # (pred, succ) -> {value: tags}
    decisions: dict = field(default_factory=dict)  # bid -> taken successor for decided tests
    test_sets: dict = field(default_factory=dict)  # bid -> tags of the tested operand

    def tags_at_entry(self, bid, value) -> frozenset:
        return self.block_in.get(bid, {}).get(value, BOTTOM)

    @property
    def reachable(self) -> set:
        return set(self.block_in)


def _join_into(dst: dict, src: dict):
    for k, v in src.items():
        old = dst.get(k)
        dst[k] = v if old is None else old | v


def analyze(fn: IrFunction) -> AnalysisResult:
    """Run the analysis to a fixed point (RPO-prioritized worklist)."""
    rpo = reverse_postorder(fn)
    index = {b: i for i, b in enumerate(rpo)}
    preds = fn.preds()
    live_in = liveness(fn).live_in
    res = AnalysisResult(fn)
    edge_state = res.edge_state
    work = {fn.entry}
    entry_state = {p: TOP for p in fn.params}

    while work:
        bid = min(work, key=index.__getitem__)
        work.discard(bid)
        if bid == fn.entry:
            st = dict(entry_state)
        else:
            st = {}
            for p in preds[bid]:
                if (p, bid) in edge_state:
                    _join_into(st, edge_state[(p, bid)])
        res.block_in[bid] = dict(st)
        blk = fn.blocks[bid]
        for ins in blk.instrs:
            if ins.dest:
                st[ins.dest] = _result(ins.op)
        term = blk.term
        out = []  # (succ, state overrides)
        op = term.op
        if op in TAG_TESTS:
            x = term.args[0]
            tag = TAG_BY_TEST[op]
            s = _tags(x, st)
            res.test_sets[bid] = s
            t_set, f_set = s & {tag}, s - {tag}
            if t_set:
                out.append((term.targets[0], {x: t_set} if not isinstance(x, Imm) else {}))
            if f_set:
                out.append((term.targets[1], {x: f_set} if not isinstance(x, Imm) else {}))
            if len(out) == 1:
                res.decisions[bid] = out[0][0]
            elif not out:
                res.decisions[bid] = None
            else:
                res.decisions.pop(bid, None)
        elif op in CHECKED_OPS:
            out.append((term.targets[0], {term.dest: frozenset({TypeTag.INT32})}))
            out.append((term.targets[1], {}))
        elif op == "call":
            out.append((term.targets[0], {term.dest: TOP}))
        else:
            out.extend((s, {}) for s in term.targets)
        for succ, override in out:
            es = dict(st)
            es.update(override)
            phis = {ph.dest: _tags(ph.incoming[bid], es) for ph in fn.blocks[succ].phis}
            # only values live into the successor matter downstream
            es = {v: es[v] for v in live_in[succ] if v in es}
            es.update(phis)
            res.edges.add((bid, succ))
            if edge_state.get((bid, succ)) != es:
                edge_state[(bid, succ)] = es
                work.add(succ)
    return res


def apply_analysis(fn: IrFunction, res: AnalysisResult = None) -> int:
    """Fold decided type tests into jumps; returns the number of tests removed."""
    res = res or analyze(fn)
    removed = 0
    for bid, taken in res.decisions.items():
        blk = fn.blocks[bid]
        if taken is None:
            # operand is bottom: the test is never reached with a value
            continue
        dropped = [s for s in blk.term.targets if s != taken]
        blk.term = Instr("jump", [], None, None, [taken])
        for s in dropped:
            for ph in fn.blocks[s].phis:
                ph.incoming.pop(bid, None)
        removed += 1
    cleanup_ssa(fn)
    merge_blocks(fn)
    return removed


def analyze_program(prog: IrProgram, apply=False) -> IrProgram:
    """Return a copy of ``prog``, with decided tests folded when ``apply``."""
    out = prog.copy()
    if apply:
        for fn in out.functions.values():
            apply_analysis(fn)
            diags = validate(fn)
            if diags:
                raise ValueError(f"analysis produced invalid IR in {fn.name}: {diags[:3]}")
    return out


def report(fn: IrFunction, res: AnalysisResult = None) -> str:
    """Human-readable listing of per-edge tag sets (live values only) and test verdicts."""
    res = res or analyze(fn)
    live = liveness(fn).live_in
    lines = [f"function {fn.name}"]
    for bid, blk in fn.blocks.items():
        if bid not in res.block_in:
            lines.append(f"  {bid}: unreachable")
            continue
        term = blk.term
        head = f"  {bid}:"
        if term.op in TAG_TESTS:
            s = res.test_sets.get(bid, BOTTOM)
            verdict = f"-> {res.decisions[bid]}" if bid in res.decisions else "kept"
            head += f" {term.op} %{term.args[0]} {format_tags(s)} {verdict}"
        lines.append(head)
        for succ in dict.fromkeys(term.targets):
            st = res.edge_state.get((bid, succ))
            if st is None:
                lines.append(f"    -> {succ}: not executable")
                continue
            vals = ", ".join(f"%{v}: {format_tags(st.get(v, BOTTOM))}" for v in sorted(live[succ]))
            lines.append(f"    -> {succ}: {vals}".rstrip())
    return "\n".join(lines)
