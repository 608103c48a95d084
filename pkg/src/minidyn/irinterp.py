"""Direct interpreter for IR programs (before or after primitive inlining).

Used to test lowering and inlining independently of the compiler, and to
observe the actual type tags of values at block entries (``on_block``
hook), which is how the type analysis is checked for soundness.
"""

from __future__ import annotations

from . import values as V
from .codebuf import LOWLEVEL, PREDICATES
from .ir import CHECKED_OPS, COND_BRANCHES, TAG_TESTS, Imm, IrProgram
from .values import TAG_BY_TEST, UNDEFINED, Closure, JSRuntimeError, js_bool, tag_of

_PRIM_VALUE = {
    "prim_add": V.prim_add, "prim_sub": V.prim_sub, "prim_mul": V.prim_mul,
    "prim_div": V.prim_div, "prim_mod": V.prim_mod, "prim_and": V.prim_and,
    "prim_or": V.prim_or, "prim_xor": V.prim_xor, "prim_shl": V.prim_shl,
    "prim_shr": V.prim_shr, "prim_neg": V.prim_neg, "prim_index_get": V.prim_index_get,
    "prim_index_put": V.prim_index_put,
}
_PRIM_BRANCH = {
    "prim_lt": V.prim_lt, "prim_le": V.prim_le, "prim_eq": V.prim_eq, "prim_truthy": V.truthy,
}


class IrInterpreter:
    def __init__(self, prog: IrProgram, on_block=None, fuel=5_000_000):
        self.prog = prog
        self.on_block = on_block
        self.fuel = fuel
        self.steps = 0
        self.output = []
        self.globals = {"print": Closure("print", native=self._print)}

    def _print(self, _vm, args):
        self.output.append(" ".join(V.to_string(a) for a in args))
        return UNDEFINED

    def load(self):
        self.call(Closure(self.prog.main, self.prog.main, ()), [])
        return self

    def call_global(self, name, args=()):
        clo = self.globals.get(name)
        if not isinstance(clo, Closure):
            raise JSRuntimeError(f"TypeError: {name} is not a function")
        return self.call(clo, list(args))

    def _val(self, env, a):
        return a.value if isinstance(a, Imm) else env[a]

    def call(self, clo: Closure, args):
        if clo.native is not None:
            return clo.native(self, args)
        fn = self.prog.functions[clo.func]
        env = {}
        for i, p in enumerate(fn.params):
            env[p] = args[i] if i < len(args) else UNDEFINED
        pred, bid = None, fn.entry
        while True:
            self.steps += 1
            if self.steps > self.fuel:
                raise RuntimeError("fuel exhausted")
            blk = fn.blocks[bid]
            if blk.phis:
                vals = [self._val(env, ph.incoming[pred]) for ph in blk.phis]
                for ph, v in zip(blk.phis, vals):
                    env[ph.dest] = v
            if self.on_block is not None:
                self.on_block(fn, pred, bid, env)
            for ins in blk.instrs:
                r = self.instr(ins, env, clo)
                if ins.dest:
                    env[ins.dest] = r
            t = blk.term
            op = t.op
            args_v = [self._val(env, a) for a in t.args]
            if op == "jump":
                nxt = t.targets[0]
            elif op == "ret":
                return args_v[0]
            elif op == "throw":
                raise JSRuntimeError(args_v[0])
            elif op in TAG_TESTS:
                nxt = t.targets[0 if tag_of(args_v[0]) == TAG_BY_TEST[op] else 1]
            elif op in COND_BRANCHES:
                nxt = t.targets[0 if PREDICATES[op](*args_v) else 1]
            elif op in _PRIM_BRANCH:
                nxt = t.targets[0 if _PRIM_BRANCH[op](*args_v) else 1]
            elif op in CHECKED_OPS:
                r = LOWLEVEL[op](*args_v)
                if r is None:
                    nxt = t.targets[1]
                else:
                    env[t.dest] = r
                    nxt = t.targets[0]
            elif op in ("call", "prim_call"):
                f = args_v[0]
                if not isinstance(f, Closure):
                    raise JSRuntimeError("TypeError: value is not a function")
                env[t.dest] = self.call(f, args_v[1:])
                nxt = t.targets[0]
            else:
                raise ValueError(f"cannot interpret {op}")
            pred, bid = bid, nxt

    def instr(self, ins, env, clo):
        op = ins.op
        args = [self._val(env, a) for a in ins.args]
        if op in LOWLEVEL:
            return LOWLEVEL[op](*args)
        if op in _PRIM_VALUE:
            return _PRIM_VALUE[op](*args)
        if op == "prim_get":
            return V.prim_get(args[0], ins.attr)
        if op == "prim_put":
            return V.prim_put(args[0], ins.attr, args[1])
        if op == "global_get":
            return self.globals.get(ins.attr, UNDEFINED)
        if op == "global_put":
            self.globals[ins.attr] = args[0]
            return None
        if op == "closure_env":
            return clo.env[int(ins.attr)]
        if op == "make_closure":
            return Closure(ins.attr, ins.attr, tuple(args))
        raise ValueError(f"cannot interpret {op}")


def run_ir(prog: IrProgram, entry="main", args=(), on_block=None):
    """Run an IR program; returns ((status, value), output) like the reference interpreter."""
    it = IrInterpreter(prog, on_block)
    try:
        it.load()
        v = it.call_global(entry, args) if entry is not None else UNDEFINED
        outcome = ("ok", V.display(v))
    except JSRuntimeError as e:
        outcome = ("error", str(e))
    return outcome, it.output


__all__ = ["IrInterpreter", "run_ir", "js_bool"]
