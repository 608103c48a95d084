"""Reference AST interpreter.

A direct tree-walking evaluator with the same observable semantics as the
compiled engine (results, printed output and runtime errors).  It shares the
runtime value model and the ``prim_*`` operator semantics with the rest of the
system but none of the IR machinery, which makes it the oracle for
differential testing.
"""

from __future__ import annotations

import sys

from . import ast
from . import values as V
from .values import UNDEFINED, Closure, JSRuntimeError, js_bool

DEFAULT_FUEL = 5_000_000

_BINOPS = {
    "+": V.prim_add, "-": V.prim_sub, "*": V.prim_mul, "/": V.prim_div, "%": V.prim_mod,
    "&": V.prim_and, "|": V.prim_or, "^": V.prim_xor, "<<": V.prim_shl, ">>": V.prim_shr,
}

_COMPARE = {
    "<": lambda a, b: V.prim_lt(a, b),
    "<=": lambda a, b: V.prim_le(a, b),
    ">": lambda a, b: V.prim_lt(b, a),
    ">=": lambda a, b: V.prim_le(b, a),
    "==": V.prim_eq,
    "!=": lambda a, b: not V.prim_eq(a, b),
}


class FuelExhausted(Exception):
    pass


class _Return(Exception):
    def __init__(self, value):
        self.value = value


class _Break(Exception):
    pass


class _Continue(Exception):
    pass


class Env:
    __slots__ = ("vars", "parent")

    def __init__(self, names, parent):
        self.vars = dict.fromkeys(names, UNDEFINED)
        self.parent = parent


class Interpreter:
    def __init__(self, program: ast.Program, fuel=DEFAULT_FUEL):
        self.program = program
        self.fuel = fuel
        self.steps = 0
        self.output = []
        self.globals = {"print": Closure("print", native=self._print)}

    def _print(self, _vm, args):
        self.output.append(" ".join(V.to_string(a) for a in args))
        return UNDEFINED

    def tick(self):
        self.steps += 1
        if self.steps > self.fuel:
            raise FuelExhausted(f"step budget of {self.fuel} exceeded")

    # -- variables --

    def lookup(self, name, env):
        while env is not None:
            if name in env.vars:
                return env.vars[name]
            env = env.parent
        return self.globals.get(name, UNDEFINED)

    def store(self, name, value, env):
        while env is not None:
            if name in env.vars:
                env.vars[name] = value
                return
            env = env.parent
        self.globals[name] = value

    # -- entry points --

    def load(self):
        body = self.program.body
        for f in ast.function_decls(body):
            self.globals[f.name] = Closure(f.name, f, None)
        self.exec_body(body, None)
        return self

    def call_global(self, name, args=()):
        clo = self.globals.get(name)
        if not isinstance(clo, Closure):
            raise JSRuntimeError(f"TypeError: {name} is not a function")
        return self.call(clo, list(args))

    def call(self, clo: Closure, args):
        if clo.native is not None:
            return clo.native(self, args)
        node = clo.func
        names = list(node.params) + ast.var_names(node.body) + [f.name for f in ast.function_decls(node.body)]
        env = Env(names, clo.env)
        for p, a in zip(node.params, args):
            env.vars[p] = a
        for f in ast.function_decls(node.body):
            env.vars[f.name] = Closure(f.name, f, env)
        try:
            self.exec_body(node.body, env)
        except _Return as r:
            return r.value
        return UNDEFINED

    # -- statements --

    def exec_body(self, body, env):
        for s in body:
            self.exec(s, env)

    def exec(self, s, env):
        self.tick()
        if isinstance(s, ast.ExprStmt):
            self.eval(s.expr, env)
        elif isinstance(s, ast.VarDecl):
            for name, init in s.decls:
                if init is not None:
                    self.store(name, self.eval(init, env), env)
        elif isinstance(s, ast.Function):
            pass
        elif isinstance(s, ast.Return):
            raise _Return(self.eval(s.value, env) if s.value is not None else UNDEFINED)
        elif isinstance(s, ast.If):
            if self.test(s.test, env):
                self.exec_body(s.then, env)
            elif s.orelse is not None:
                self.exec_body(s.orelse, env)
        elif isinstance(s, ast.While):
            while self.test(s.test, env):
                try:
                    self.exec_body(s.body, env)
                except _Break:
                    break
                except _Continue:
                    pass
        elif isinstance(s, ast.For):
            if s.init is not None:
                self.exec(s.init, env)
            while s.test is None or self.test(s.test, env):
                try:
                    self.exec_body(s.body, env)
                except _Break:
                    break
                except _Continue:
                    pass
                if s.update is not None:
                    self.eval(s.update, env)
        elif isinstance(s, ast.Break):
            raise _Break()
        elif isinstance(s, ast.Continue):
            raise _Continue()
        else:
            raise TypeError(f"unsupported statement {type(s).__name__}")

    def test(self, e, env) -> bool:
        return V.truthy(self.eval(e, env))

    # -- expressions --

    def eval(self, e, env):
        self.tick()
        if isinstance(e, ast.Literal):
            return e.value
        if isinstance(e, ast.Ident):
            return self.lookup(e.name, env)
        if isinstance(e, ast.Unary):
            if e.op == "-":
                return V.prim_neg(self.eval(e.operand, env))
            return js_bool(not self.test(e.operand, env))
        if isinstance(e, ast.Binary):
            a = self.eval(e.left, env)
            b = self.eval(e.right, env)
            if e.op in _COMPARE:
                return js_bool(_COMPARE[e.op](a, b))
            return _BINOPS[e.op](a, b)
        if isinstance(e, ast.Logical):
            left = self.eval(e.left, env)
            if V.truthy(left) == (e.op == "&&"):
                return self.eval(e.right, env)
            return left
        if isinstance(e, ast.Conditional):
            return self.eval(e.then if self.test(e.test, env) else e.orelse, env)
        if isinstance(e, ast.Assign):
            return self.assign(e, env)
        if isinstance(e, ast.Update):
            base, old = self.load_target(e.target, env)
            new = V.prim_add(old, 1) if e.op == "++" else V.prim_sub(old, 1)
            self.store_target(e.target, new, base, env)
            return new if e.prefix else old
        if isinstance(e, ast.Member):
            return V.prim_get(self.eval(e.obj, env), e.name)
        if isinstance(e, ast.Index):
            a = self.eval(e.obj, env)
            return V.prim_index_get(a, self.eval(e.index, env))
        if isinstance(e, ast.Call):
            f = self.eval(e.callee, env)
            args = [self.eval(a, env) for a in e.args]
            if not isinstance(f, Closure):
                raise JSRuntimeError("TypeError: value is not a function")
            return self.call(f, args)
        if isinstance(e, ast.ArrayLit):
            return V.new_array(*[self.eval(x, env) for x in e.items])
        if isinstance(e, ast.ObjectLit):
            kv = []
            for k, v in e.pairs:
                kv += [k, self.eval(v, env)]
            return V.new_object(*kv)
        if isinstance(e, ast.Function):
            return Closure(e.name or "anon", e, env)
        raise TypeError(f"unsupported expression {type(e).__name__}")

    def load_target(self, t, env):
        if isinstance(t, ast.Ident):
            return None, self.lookup(t.name, env)
        if isinstance(t, ast.Member):
            o = self.eval(t.obj, env)
            return (o,), V.prim_get(o, t.name)
        a = self.eval(t.obj, env)
        i = self.eval(t.index, env)
        return (a, i), V.prim_index_get(a, i)

    def store_target(self, t, value, base, env):
        if isinstance(t, ast.Ident):
            self.store(t.name, value, env)
        elif isinstance(t, ast.Member):
            V.prim_put(base[0], t.name, value)
        else:
            V.prim_index_put(base[0], base[1], value)

    def assign(self, e, env):
        t = e.target
        if e.op == "=":
            base = None
            if isinstance(t, ast.Member):
                base = (self.eval(t.obj, env),)
            elif isinstance(t, ast.Index):
                base = (self.eval(t.obj, env), self.eval(t.index, env))
            v = self.eval(e.value, env)
            self.store_target(t, v, base, env)
            return v
        base, old = self.load_target(t, env)
        v = _BINOPS[e.op[:-1]](old, self.eval(e.value, env))
        self.store_target(t, v, base, env)
        return v


def run_reference(source_or_program, entry="main", args=(), fuel=DEFAULT_FUEL):
    """Evaluate a program; returns (outcome, output) like ``RunResult.outcome``."""
    from .parser import parse

    prog = parse(source_or_program) if isinstance(source_or_program, str) else source_or_program
    interp = Interpreter(prog, fuel)
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 20000))
    try:
        interp.load()
        value = interp.call_global(entry, args) if entry is not None else UNDEFINED
        outcome = ("ok", V.display(value))
    except JSRuntimeError as e:
        outcome = ("error", str(e))
    finally:
        sys.setrecursionlimit(old)
    return outcome, interp.output
