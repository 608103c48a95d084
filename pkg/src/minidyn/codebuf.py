"""Executable code-buffer operations.

Compiled code is a flat list of op objects shared by all functions.  The
executor loop is ``pc = code[pc].step(vm, pc)``; a negative pc halts.  Operands
are register slot indices into the current frame's register list.  Branching
ops carry mutable ``targets`` (patched when a stub is resolved) and optional
parallel ``moves`` per arm that resolve phis of the target block.
"""

from __future__ import annotations

import math

from . import values as V
from .values import JSRuntimeError, TypeTag

# Python types carrying each tag (cells are boxed as objects).
TAG_TYPES = {
    TypeTag.INT32: (int,),
    TypeTag.FLOAT64: (float,),
    TypeTag.CONST: (V.JSConst,),
    TypeTag.STRING: (str,),
    TypeTag.OBJECT: (V.JSObject, V.Cell),
    TypeTag.ARRAY: (V.JSArray,),
    TypeTag.CLOSURE: (V.Closure,),
}

# Pure low-level operations (no access to VM state), by opcode.
LOWLEVEL = {
    name: getattr(V, name)
    for name in (
        "add_f64", "sub_f64", "mul_f64", "div_f64", "mod_f64", "neg_f64",
        "i32_to_f64", "f64_to_i32", "and_i32", "or_i32", "xor_i32", "shl_i32", "shr_i32",
        "to_string", "strcat", "str_len", "str_char", "arr_len", "arr_get", "arr_put",
        "obj_get", "obj_put", "new_object", "new_array",
        "add_i32_ovf", "sub_i32_ovf", "mul_i32_ovf", "div_i32_chk", "mod_i32_chk",
    )
}
LOWLEVEL["cell_new"] = V.Cell
LOWLEVEL["cell_get"] = lambda c: c.value


def _cell_set(c, v):
    c.value = v


LOWLEVEL["cell_set"] = _cell_set


def _nz_f64(x):
    return x != 0.0 and not math.isnan(x)


# Predicates of the value branches.
PREDICATES = {
    "br_lt_i32": lambda x, y: x < y,
    "br_le_i32": lambda x, y: x <= y,
    "br_eq_i32": lambda x, y: x == y,
    "br_lt_f64": lambda x, y: x < y,
    "br_le_f64": lambda x, y: x <= y,
    "br_eq_f64": lambda x, y: x == y,
    "br_eq_ref": V.eq_ref,
    "br_true": lambda v: v is V.TRUE,
    "br_nz_i32": lambda v: v != 0,
    "br_nz_f64": _nz_f64,
    "br_nonempty_str": lambda s: s != "",
}


def _apply_moves(regs, moves):
    vals = [regs[s] for _, s in moves]
    for (d, _), v in zip(moves, vals):
        regs[d] = v


class Op:
    __slots__ = ()
    counted = True  # contributes to ops_emitted

    def describe(self) -> str:
        return type(self).__name__.lower()


class Enter(Op):
    """Version start marker; records first execution (not an emitted op)."""

    __slots__ = ("version",)
    counted = False

    def __init__(self, version):
        self.version = version

    def step(self, vm, pc):
        v = self.version
        if not v.executed:
            v.executed = True
            vm.exec_order.append(v)
        return pc + 1

    def describe(self):
        return f"enter {self.version.label()}"


class Compute(Op):
    __slots__ = ("fn", "dst", "srcs", "name")

    def __init__(self, name, fn, dst, srcs):
        self.name, self.fn, self.dst, self.srcs = name, fn, dst, tuple(srcs)

    def step(self, vm, pc):
        r = vm.regs
        res = self.fn(*[r[s] for s in self.srcs])
        if self.dst is not None:
            r[self.dst] = res
        vm.ops_executed += 1
        return pc + 1

    def describe(self):
        d = f"r{self.dst} = " if self.dst is not None else ""
        return d + self.name + " " + ", ".join(f"r{s}" for s in self.srcs)


class Move(Op):
    __slots__ = ("moves",)

    def __init__(self, moves):
        self.moves = tuple(moves)

    def step(self, vm, pc):
        _apply_moves(vm.regs, self.moves)
        vm.ops_executed += 1
        return pc + 1

    def describe(self):
        return "move " + ", ".join(f"r{d} <- r{s}" for d, s in self.moves)


class Branch(Op):
    """Base class of ops with patchable successor arms."""

    __slots__ = ("targets", "moves", "meta")

    def _init_arms(self, n):
        self.targets = [None] * n
        self.moves = [()] * n
        self.meta = None

    def take(self, vm, i):
        mv = self.moves[i]
        if mv:
            _apply_moves(vm.regs, mv)
        return self.targets[i]

    def _arms(self):
        return " ".join(f"[{t}]" for t in self.targets)


class Jump(Branch):
    __slots__ = ()

    def __init__(self):
        self._init_arms(1)

    def step(self, vm, pc):
        vm.ops_executed += 1
        return self.take(vm, 0)

    def describe(self):
        return "jump " + self._arms()


class TagTest(Branch):
    __slots__ = ("tag", "types", "src", "label")

    def __init__(self, tag, src, label=None):
        self._init_arms(2)
        self.tag, self.types, self.src = tag, TAG_TYPES[tag], src
        self.label = label  # (function name, IR value) for attribution

    def step(self, vm, pc):
        vm.ops_executed += 1
        vm.tests[self.tag] += 1
        return self.take(vm, 0 if type(vm.regs[self.src]) in self.types else 1)

    def describe(self):
        return f"{self.tag.test_name} r{self.src} " + self._arms()


class TracedTagTest(TagTest):
    """Type test that also counts executions per tested IR value."""

    __slots__ = ()

    def step(self, vm, pc):
        vm.test_log[self.label] += 1
        return TagTest.step(self, vm, pc)


class CondBr(Branch):
    __slots__ = ("pred", "srcs", "name")

    def __init__(self, name, srcs):
        self._init_arms(2)
        self.name, self.pred, self.srcs = name, PREDICATES[name], tuple(srcs)

    def step(self, vm, pc):
        vm.ops_executed += 1
        r = vm.regs
        return self.take(vm, 0 if self.pred(*[r[s] for s in self.srcs]) else 1)

    def describe(self):
        return f"{self.name} " + ", ".join(f"r{s}" for s in self.srcs) + " " + self._arms()


class Checked(Branch):
    """Checked int32 op: arm 0 on success (defines dst), arm 1 on failure."""

    __slots__ = ("fn", "dst", "srcs", "name")

    def __init__(self, name, dst, srcs):
        self._init_arms(2)
        self.name, self.fn, self.dst, self.srcs = name, LOWLEVEL[name], dst, tuple(srcs)

    def step(self, vm, pc):
        vm.ops_executed += 1
        r = vm.regs
        res = self.fn(*[r[s] for s in self.srcs])
        if res is None:
            return self.take(vm, 1)
        r[self.dst] = res
        return self.take(vm, 0)

    def describe(self):
        return f"r{self.dst} = {self.name} " + ", ".join(f"r{s}" for s in self.srcs) + " " + self._arms()


class Call(Branch):
    """Call a closure; arm 0 is the continuation receiving the result in dst."""

    __slots__ = ("dst", "srcs")

    def __init__(self, dst, srcs):
        self._init_arms(1)
        self.dst, self.srcs = dst, tuple(srcs)

    def step(self, vm, pc):
        vm.ops_executed += 1
        r = vm.regs
        clo = r[self.srcs[0]]
        args = [r[s] for s in self.srcs[1:]]
        if clo.native is not None:
            r[self.dst] = clo.native(vm, args)
            return self.take(vm, 0)
        return vm.enter_function(clo, args, self)

    def describe(self):
        return f"r{self.dst} = call " + ", ".join(f"r{s}" for s in self.srcs) + " " + self._arms()


class Ret(Op):
    __slots__ = ("src",)

    def __init__(self, src):
        self.src = src

    def step(self, vm, pc):
        vm.ops_executed += 1
        return vm.leave_function(vm.regs[self.src])

    def describe(self):
        return f"ret r{self.src}"


class Throw(Op):
    __slots__ = ("msg",)

    def __init__(self, msg):
        self.msg = msg

    def step(self, vm, pc):
        vm.ops_executed += 1
        raise JSRuntimeError(self.msg)

    def describe(self):
        return f"throw {self.msg!r}"


class Stub(Op):
    """Placeholder for a not-yet-compiled branch target."""

    __slots__ = ("site", "arm", "fs", "block", "ctx")

    def __init__(self, site, arm, fs, block, ctx):
        self.site, self.arm, self.fs, self.block, self.ctx = site, arm, fs, block, ctx

    def step(self, vm, pc):
        return vm.engine.on_stub_hit(self, pc)

    def describe(self):
        return f"stub {self.fs.fn.name}:{self.block} {self.ctx}"
