"""Inlining of runtime primitives.

Every ``prim_*`` operation produced by lowering is replaced by an IR template
that dispatches on operand type tags with ``is_*`` test branches and then
runs typed low-level operations.  This exposes the type tests to the backend
so that versioning (or the type analysis) can eliminate them.

The ``+`` template follows the classic int32/float64/string dispatch shape:

    if is_i32(x):
        if is_i32(y):
            r = add_i32_ovf(x, y)  -> overflow: add_f64(i32_to_f64(x), i32_to_f64(y))
        elif is_f64(y): add_f64(i32_to_f64(x), y)
    elif is_f64(x):
        if is_i32(y): add_f64(x, i32_to_f64(y))
        elif is_f64(y): add_f64(x, y)
    strcat(to_string(x), to_string(y))

The other operators reuse the same two-level dispatch by analogy (their
internals are not documented in the literature); non-number fallbacks throw.
"""

from __future__ import annotations

import re

from .ir import Block, Imm, Instr, IrFunction, IrProgram, Phi, is_var, validate
from .lower import cleanup_ssa
from .values import TypeTag

I32, F64, CONST, STRING, OBJECT, ARRAY, CLOSURE = (
    TypeTag.INT32, TypeTag.FLOAT64, TypeTag.CONST, TypeTag.STRING,
    TypeTag.OBJECT, TypeTag.ARRAY, TypeTag.CLOSURE,
)

ARITH = {
    "prim_add": ("add_i32_ovf", "add_f64"),
    "prim_sub": ("sub_i32_ovf", "sub_f64"),
    "prim_mul": ("mul_i32_ovf", "mul_f64"),
    "prim_div": ("div_i32_chk", "div_f64"),
    "prim_mod": ("mod_i32_chk", "mod_f64"),
}
BITWISE = {
    "prim_and": "and_i32", "prim_or": "or_i32", "prim_xor": "xor_i32",
    "prim_shl": "shl_i32", "prim_shr": "shr_i32",
}
COMPARE = {"prim_lt": "lt", "prim_le": "le"}
ARITH_SYMBOL = {"prim_add": "+", "prim_sub": "-", "prim_mul": "*", "prim_div": "/", "prim_mod": "%"}

# Number of is_* test instructions each template contains (for one
# statically unknown operand set); checked by the test-suite.
TEMPLATE_TESTS = {
    **{op: 6 for op in ARITH},
    **{op: 4 for op in BITWISE},
    "prim_neg": 2,
    "prim_lt": 6, "prim_le": 6, "prim_eq": 6, "prim_truthy": 4,
    "prim_get": 1, "prim_get.length": 3, "prim_put": 1,
    "prim_index_get": 6, "prim_index_put": 4,
    "prim_call": 1,
}


class Builder:
    """Emits template blocks into a function with fresh block and value names."""

    def __init__(self, fn: IrFunction):
        self.fn = fn
        nums = [int(m.group(1)) for b in fn.blocks if (m := re.fullmatch(r"b(\d+)", b))]
        self.nb = max(nums, default=-1) + 1
        self.nv = 0
        for v in fn.values():
            m = re.search(r"\.(\d+)$", v)
            if m:
                self.nv = max(self.nv, int(m.group(1)))
        self.created = []

    def block(self) -> Block:
        b = Block(f"b{self.nb}")
        self.nb += 1
        self.fn.blocks[b.id] = b
        self.created.append(b)
        return b

    def val(self, hint="t") -> str:
        self.nv += 1
        return f"{hint}.{self.nv}"

    def op(self, blk, opname, args, hint="t"):
        d = self.val(hint)
        blk.instrs.append(Instr(opname, list(args), d))
        return d

    def effect(self, blk, opname, args, attr=None):
        blk.instrs.append(Instr(opname, list(args), None, attr))

    def test(self, blk, tag, x, t, f):
        blk.term = Instr(tag.test_name, [x], None, None, [t.id, f.id])

    def branch(self, blk, opname, args, t, f):
        blk.term = Instr(opname, list(args), None, None, [t.id, f.id])

    def checked(self, blk, opname, args, hint="t"):
        """Checked int op; returns (result, normal block, failure block)."""
        normal, fail = self.block(), self.block()
        d = self.val(hint)
        blk.term = Instr(opname, list(args), d, None, [normal.id, fail.id])
        return d, normal, fail

    def jump(self, blk, target):
        blk.term = Instr("jump", [], None, None, [target.id])

    def throw(self, blk, msg):
        blk.term = Instr("throw", [Imm(msg)], None, None, [])


# -- value templates ---------------------------------------------------------
#
# Each takes (builder, entry block, args) and returns a list of
# (leaf block, result operand) pairs; leaves are left without terminator and
# will jump to the continuation.


def t_arith(b: Builder, blk, op, x, y):
    int_op, f64_op = ARITH[op]
    leaves = []
    slow = b.block()
    xi, xf = b.block(), b.block()
    b.test(blk, I32, x, xi, xf)
    # x is int32
    xi_yi, xi_yn = b.block(), b.block()
    b.test(xi, I32, y, xi_yi, xi_yn)
    r, ok, ovf = b.checked(xi_yi, int_op, [x, y])
    leaves.append((ok, r))
    a1 = b.op(ovf, "i32_to_f64", [x])
    a2 = b.op(ovf, "i32_to_f64", [y])
    leaves.append((ovf, b.op(ovf, f64_op, [a1, a2])))
    xi_yf = b.block()
    b.test(xi_yn, F64, y, xi_yf, slow)
    a1 = b.op(xi_yf, "i32_to_f64", [x])
    leaves.append((xi_yf, b.op(xi_yf, f64_op, [a1, y])))
    # x is float64
    xf_f, xf_y = b.block(), b.block()
    b.test(xf, F64, x, xf_f, slow)
    xf_yi, xf_yn = b.block(), b.block()
    b.test(xf_f, I32, y, xf_yi, xf_yn)
    a2 = b.op(xf_yi, "i32_to_f64", [y])
    leaves.append((xf_yi, b.op(xf_yi, f64_op, [x, a2])))
    b.test(xf_yn, F64, y, xf_y, slow)
    leaves.append((xf_y, b.op(xf_y, f64_op, [x, y])))
    if op == "prim_add":
        sx = b.op(slow, "to_string", [x])
        sy = b.op(slow, "to_string", [y])
        leaves.append((slow, b.op(slow, "strcat", [sx, sy])))
    else:
        b.throw(slow, f"TypeError: {ARITH_SYMBOL[op]} on non-numbers")
    return leaves


def _to_i32(b: Builder, blk, v, err):
    """Coerce a number to int32 (ToInt32) or throw; returns (block, int value)."""
    is_int, not_int, conv, join = b.block(), b.block(), b.block(), b.block()
    b.test(blk, I32, v, is_int, not_int)
    b.test(not_int, F64, v, conv, err)
    c = b.op(conv, "f64_to_i32", [v])
    b.jump(is_int, join)
    b.jump(conv, join)
    d = b.val("i")
    join.phis.append(Phi(d, {is_int.id: v, conv.id: c}))
    return join, d


def t_bitwise(b: Builder, blk, op, x, y):
    err = b.block()
    b.throw(err, "TypeError: bitwise operator on non-number")
    blk2, xi = _to_i32(b, blk, x, err)
    blk3, yi = _to_i32(b, blk2, y, err)
    return [(blk3, b.op(blk3, BITWISE[op], [xi, yi]))]


def t_neg(b: Builder, blk, x):
    leaves = []
    xi, xn, xf, err = b.block(), b.block(), b.block(), b.block()
    b.test(blk, I32, x, xi, xn)
    r, ok, ovf = b.checked(xi, "sub_i32_ovf", [Imm(0), x])
    leaves.append((ok, r))
    a = b.op(ovf, "i32_to_f64", [x])
    leaves.append((ovf, b.op(ovf, "neg_f64", [a])))
    b.test(xn, F64, x, xf, err)
    leaves.append((xf, b.op(xf, "neg_f64", [x])))
    b.throw(err, "TypeError: unary - on non-number")
    return leaves


def t_get(b: Builder, blk, name, o):
    leaves = []
    is_obj, other, err = b.block(), b.block(), b.block()
    b.test(blk, OBJECT, o, is_obj, other)
    leaves.append((is_obj, b.op(is_obj, "obj_get", [o, Imm(name)])))
    if name == "length":
        is_arr, not_arr, is_str = b.block(), b.block(), b.block()
        b.test(other, ARRAY, o, is_arr, not_arr)
        leaves.append((is_arr, b.op(is_arr, "arr_len", [o])))
        b.test(not_arr, STRING, o, is_str, err)
        leaves.append((is_str, b.op(is_str, "str_len", [o])))
    else:
        b.jump(other, err)
    b.throw(err, f"TypeError: cannot read property {name!r}")
    return leaves


def t_put(b: Builder, blk, name, o, v):
    is_obj, err = b.block(), b.block()
    b.test(blk, OBJECT, o, is_obj, err)
    b.effect(is_obj, "obj_put", [o, Imm(name), v])
    b.throw(err, f"TypeError: cannot set property {name!r}")
    return [(is_obj, None)]


def t_index_get(b: Builder, blk, a, i):
    leaves = []
    err = b.block()
    for kind, key_tag, opname in ((ARRAY, I32, "arr_get"), (OBJECT, STRING, "obj_get"), (STRING, I32, "str_char")):
        yes, no, key_ok = b.block(), b.block(), b.block()
        b.test(blk, kind, a, yes, no)
        b.test(yes, key_tag, i, key_ok, err)
        leaves.append((key_ok, b.op(key_ok, opname, [a, i])))
        blk = no
    b.jump(blk, err)
    b.throw(err, "TypeError: invalid indexing")
    return leaves


def t_index_put(b: Builder, blk, a, i, v):
    leaves = []
    err = b.block()
    for kind, key_tag, opname in ((ARRAY, I32, "arr_put"), (OBJECT, STRING, "obj_put")):
        yes, no, key_ok = b.block(), b.block(), b.block()
        b.test(blk, kind, a, yes, no)
        b.test(yes, key_tag, i, key_ok, err)
        b.effect(key_ok, opname, [a, i, v])
        leaves.append((key_ok, None))
        blk = no
    b.jump(blk, err)
    b.throw(err, "TypeError: invalid indexed store")
    return leaves


# -- branch templates ---------------------------------------------------------
#
# Each takes (builder, entry block, args, true block, false block) and sets
# terminators everywhere; returns nothing.


def t_compare(b: Builder, blk, op, x, y, t, f):
    kind = COMPARE[op]
    err = b.block()
    b.throw(err, f"TypeError: {'<' if kind == 'lt' else '<='} on non-numbers")
    xi, xn = b.block(), b.block()
    b.test(blk, I32, x, xi, xn)
    xi_yi, xi_yn, xi_yf = b.block(), b.block(), b.block()
    b.test(xi, I32, y, xi_yi, xi_yn)
    b.branch(xi_yi, f"br_{kind}_i32", [x, y], t, f)
    b.test(xi_yn, F64, y, xi_yf, err)
    a1 = b.op(xi_yf, "i32_to_f64", [x])
    b.branch(xi_yf, f"br_{kind}_f64", [a1, y], t, f)
    xf, xf_yi, xf_yn, xf_yf = b.block(), b.block(), b.block(), b.block()
    b.test(xn, F64, x, xf, err)
    b.test(xf, I32, y, xf_yi, xf_yn)
    a2 = b.op(xf_yi, "i32_to_f64", [y])
    b.branch(xf_yi, f"br_{kind}_f64", [x, a2], t, f)
    b.test(xf_yn, F64, y, xf_yf, err)
    b.branch(xf_yf, f"br_{kind}_f64", [x, y], t, f)


def t_eq(b: Builder, blk, x, y, t, f):
    xi, xn = b.block(), b.block()
    b.test(blk, I32, x, xi, xn)
    xi_yi, xi_yn, xi_yf = b.block(), b.block(), b.block()
    b.test(xi, I32, y, xi_yi, xi_yn)
    b.branch(xi_yi, "br_eq_i32", [x, y], t, f)
    mismatch = b.block()
    b.jump(mismatch, f)
    b.test(xi_yn, F64, y, xi_yf, mismatch)
    a1 = b.op(xi_yf, "i32_to_f64", [x])
    b.branch(xi_yf, "br_eq_f64", [a1, y], t, f)
    xf, other, xf_yi, xf_yn, xf_yf = b.block(), b.block(), b.block(), b.block(), b.block()
    b.test(xn, F64, x, xf, other)
    b.test(xf, I32, y, xf_yi, xf_yn)
    a2 = b.op(xf_yi, "i32_to_f64", [y])
    b.branch(xf_yi, "br_eq_f64", [x, a2], t, f)
    b.test(xf_yn, F64, y, xf_yf, mismatch)
    b.branch(xf_yf, "br_eq_f64", [x, y], t, f)
    b.branch(other, "br_eq_ref", [x, y], t, f)


def t_truthy(b: Builder, blk, v, t, f):
    for tag, opname in ((CONST, "br_true"), (I32, "br_nz_i32"), (F64, "br_nz_f64"), (STRING, "br_nonempty_str")):
        yes, no = b.block(), b.block()
        b.test(blk, tag, v, yes, no)
        b.branch(yes, opname, [v], t, f)
        blk = no
    b.jump(blk, t)


def t_call(b: Builder, blk, dest, args, cont):
    yes, err = b.block(), b.block()
    b.test(blk, CLOSURE, args[0], yes, err)
    yes.term = Instr("call", list(args), dest, None, [cont.id])
    b.throw(err, "TypeError: value is not a function")


# -- driver ---------------------------------------------------------------------


def _retarget_phis(fn: IrFunction, old_pred: str, new_preds: dict):
    """Replace phi entries keyed by ``old_pred`` with entries for ``new_preds[succ]``."""
    for sid, preds in new_preds.items():
        for ph in fn.blocks[sid].phis:
            if old_pred in ph.incoming:
                v = ph.incoming.pop(old_pred)
                for p in preds:
                    ph.incoming[p] = v


def _edges_into(blocks, succs):
    out = {s: [] for s in succs}
    for blk in blocks:
        if blk.term:
            for s in blk.term.targets:
                if s in out and blk.id not in out[s]:
                    out[s].append(blk.id)
    return out


def _inline_instr(fn: IrFunction, blk: Block, k: int, b: Builder) -> Block:
    """Inline ``blk.instrs[k]``; returns the continuation block."""
    b.created = []
    ins = blk.instrs[k]
    tail = b.block()
    tail.instrs = blk.instrs[k + 1 :]
    tail.term = blk.term
    blk.instrs = blk.instrs[:k]
    blk.term = None
    if tail.term:
        _retarget_phis(fn, blk.id, {s: [tail.id] for s in tail.term.targets})

    op, args = ins.op, ins.args
    if op in ARITH:
        leaves = t_arith(b, blk, op, *args)
    elif op in BITWISE:
        leaves = t_bitwise(b, blk, op, *args)
    elif op == "prim_neg":
        leaves = t_neg(b, blk, *args)
    elif op == "prim_get":
        leaves = t_get(b, blk, ins.attr, *args)
    elif op == "prim_put":
        leaves = t_put(b, blk, ins.attr, *args)
    elif op == "prim_index_get":
        leaves = t_index_get(b, blk, *args)
    elif op == "prim_index_put":
        leaves = t_index_put(b, blk, *args)
    else:
        raise ValueError(f"no template for {op}")
    for leaf, _ in leaves:
        b.jump(leaf, tail)
    if ins.dest:
        tail.phis.append(Phi(ins.dest, {leaf.id: r for leaf, r in leaves}))
    _layout_after(fn, blk, b.created)
    return tail


def _inline_term(fn: IrFunction, blk: Block, b: Builder):
    b.created = []
    term = blk.term
    succs = list(term.targets)
    blk.term = None
    op, args = term.op, term.args
    if op in COMPARE:
        t_compare(b, blk, op, *args, fn.blocks[succs[0]], fn.blocks[succs[1]])
    elif op == "prim_eq":
        t_eq(b, blk, *args, fn.blocks[succs[0]], fn.blocks[succs[1]])
    elif op == "prim_truthy":
        t_truthy(b, blk, *args, fn.blocks[succs[0]], fn.blocks[succs[1]])
    elif op == "prim_call":
        t_call(b, blk, term.dest, args, fn.blocks[succs[0]])
    else:
        raise ValueError(f"no template for {op}")
    new_preds = _edges_into([blk] + b.created, succs)
    _retarget_phis(fn, blk.id, new_preds)
    _layout_after(fn, blk, b.created)


def _layout_after(fn: IrFunction, blk: Block, created: list):
    """Place newly created blocks right after ``blk`` in layout order."""
    order = []
    ids = {c.id for c in created}
    for bid, bb in fn.blocks.items():
        if bid in ids:
            continue
        order.append((bid, bb))
        if bid == blk.id:
            order.extend((c.id, c) for c in created)
    fn.blocks.clear()
    fn.blocks.update(order)


def merge_blocks(fn: IrFunction):
    """Merge a block into its sole predecessor when that predecessor just jumps to it."""
    preds = fn.preds()
    changed = True
    while changed:
        changed = False
        for bid, blk in list(fn.blocks.items()):
            if bid not in fn.blocks or blk.term is None or blk.term.op != "jump":
                continue
            sid = blk.term.targets[0]
            if sid == fn.entry or sid == bid or preds[sid] != [bid]:
                continue
            succ = fn.blocks[sid]
            if succ.phis:
                continue
            blk.instrs.extend(succ.instrs)
            blk.term = succ.term
            del fn.blocks[sid]
            del preds[sid]
            for s in blk.succs:
                preds[s] = [bid if p == sid else p for p in preds[s]]
                for ph in fn.blocks[s].phis:
                    if sid in ph.incoming:
                        ph.incoming[bid] = ph.incoming.pop(sid)
            changed = True


def inline_function(fn: IrFunction) -> IrFunction:
    b = Builder(fn)
    work = list(fn.blocks.values())
    while work:
        blk = work.pop(0)
        for k, ins in enumerate(blk.instrs):
            if ins.op.startswith("prim_"):
                tail = _inline_instr(fn, blk, k, b)
                work.insert(0, tail)
                break
        else:
            if blk.term is not None and blk.term.op.startswith("prim_"):
                _inline_term(fn, blk, b)
    cleanup_ssa(fn)
    merge_blocks(fn)
    return fn


def inline_primitives(prog: IrProgram, check=True) -> IrProgram:
    for fn in prog.functions.values():
        inline_function(fn)
        if check:
            diags = validate(fn)
            if diags:
                raise ValueError(f"inlining produced invalid IR in {fn.name}: {diags[:3]}")
    return prog


def uses_prims(fn: IrFunction) -> bool:
    for blk in fn.blocks.values():
        for ins in blk.instrs + [blk.term]:
            if ins.op.startswith("prim_"):
                return True
    return False


def count_tests(fn: IrFunction) -> int:
    return sum(1 for blk in fn.blocks.values() if blk.term.op.startswith("is_"))


__all__ = ["inline_primitives", "inline_function", "merge_blocks", "TEMPLATE_TESTS", "is_var"]
