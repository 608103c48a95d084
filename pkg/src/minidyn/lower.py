"""Lowering from the MiniDyn AST to SSA IR.

SSA is built on the fly while walking the AST (Braun et al., "Simple and
Efficient Construction of SSA Form"): variable reads look up the current
definition per block, inserting phis at merge points; trivial phis are
removed in a final pass.  Operators become ``prim_*`` instructions that
:mod:`minidyn.templates` later expands into type-dispatch code.

Variables captured by nested functions live in heap cells rather than SSA
values; names not declared in any enclosing function are globals.
"""

from __future__ import annotations

from . import ast
from .ir import Block, Imm, Instr, IrFunction, IrProgram, Phi, is_var, validate
from .values import FALSE, TRUE, UNDEFINED

TOP_NAME = "__top__"


class LoweringError(Exception):
    pass


# -- scope resolution --------------------------------------------------------


class FnInfo:
    def __init__(self, node, parent, ir_name):
        self.node = node
        self.parent = parent
        self.ir_name = ir_name
        if node is None:
            self.declared = set()
        else:
            self.declared = set(node.params) | set(ast.var_names(node.body))
            self.declared |= {f.name for f in ast.function_decls(node.body)}
        self.captured = set()
        self.free = []  # ordered names captured from enclosing functions


def _children(node):
    if isinstance(node, list):
        return node
    if isinstance(node, ast.Unary):
        return [node.operand]
    if isinstance(node, (ast.Binary, ast.Logical)):
        return [node.left, node.right]
    if isinstance(node, ast.Conditional):
        return [node.test, node.then, node.orelse]
    if isinstance(node, ast.Assign):
        return [node.target, node.value]
    if isinstance(node, ast.Update):
        return [node.target]
    if isinstance(node, ast.Member):
        return [node.obj]
    if isinstance(node, ast.Index):
        return [node.obj, node.index]
    if isinstance(node, ast.Call):
        return [node.callee] + node.args
    if isinstance(node, ast.ArrayLit):
        return node.items
    if isinstance(node, ast.ObjectLit):
        return [v for _, v in node.pairs]
    if isinstance(node, ast.VarDecl):
        return [Ident_for(n, node.pos) for n, _ in node.decls] + [e for _, e in node.decls if e]
    if isinstance(node, ast.ExprStmt):
        return [node.expr]
    if isinstance(node, ast.If):
        return [node.test, node.then, node.orelse or []]
    if isinstance(node, ast.While):
        return [node.test, node.body]
    if isinstance(node, ast.For):
        return [x for x in (node.init, node.test, node.update) if x] + [node.body]
    if isinstance(node, ast.Return):
        return [node.value] if node.value else []
    return []


def Ident_for(name, pos):
    return ast.Ident(name, pos=pos)


class Resolver:
    """Assign IR names to functions and compute captured/free variables."""

    def __init__(self):
        self.infos = {}  # id(Function node) -> FnInfo
        self.names = set()

    def unique(self, base):
        name, k = base, 1
        while name in self.names:
            k += 1
            name = f"{base}#{k}"
        self.names.add(name)
        return name

    def run(self, prog: ast.Program) -> FnInfo:
        top = FnInfo(None, None, self.unique(TOP_NAME))
        self.visit(prog.body, top)
        return top

    def resolve(self, name, info):
        s = info
        while s is not None and s.node is not None:
            if name in s.declared:
                return s
            s = s.parent
        return None

    def use(self, name, info):
        owner = self.resolve(name, info)
        if owner is None or owner is info:
            return
        owner.captured.add(name)
        s = info
        while s is not owner:
            if name not in s.free:
                s.free.append(name)
            s = s.parent

    def visit(self, node, info):
        if isinstance(node, ast.Function):
            if info.node is None:
                base = node.name or "anon"
            else:
                base = f"{info.ir_name}.{node.name or 'anon'}"
            child = FnInfo(node, info, self.unique(base))
            self.infos[id(node)] = child
            self.visit(node.body, child)
            # free variables of the child are uses in this function
            for name in child.free:
                self.use(name, info)
            return
        if isinstance(node, ast.Ident):
            self.use(node.name, info)
            return
        for c in _children(node):
            if c is not None:
                self.visit(c, info)


# -- per-function SSA builder --------------------------------------------------


class FnLowerer:
    def __init__(self, lowering, info: FnInfo):
        self.lowering = lowering
        self.info = info
        node = info.node
        self.is_top = node is None
        params = [] if self.is_top else list(node.params)
        self.nvals = 0
        self.nblocks = 0
        self.param_vals = [self.fresh(p) for p in params]
        self.fn = IrFunction(info.ir_name, list(self.param_vals), "", nfree=len(info.free))
        self.preds = {}
        self.sealed = set()
        self.defs = {}  # block id -> {var: operand}
        self.incomplete = {}  # block id -> {var: Phi}
        self.phi_block = {}  # phi dest -> block id
        self.loops = []  # (continue target, break target)
        self.cells = {}  # own captured variable -> cell value
        self.free_cells = {}  # free variable -> cell value
        self.locals = set()
        self.ntemps = 0

        entry = self.new_block()
        self.fn.entry = entry.id
        self.seal(entry.id)
        self.cur = entry

        if not self.is_top:
            self.locals = set(info.declared) - info.captured
        for i, name in enumerate(info.free):
            self.free_cells[name] = self.emit("closure_env", [], dest="env." + name, attr=str(i))
        if not self.is_top:
            pvals = dict(zip(params, self.param_vals))
            for name in sorted(info.captured):
                init = pvals.get(name, Imm(UNDEFINED))
                self.cells[name] = self.emit("cell_new", [init], dest="cell." + name)
            for name in sorted(self.locals):
                self.write(name, entry.id, pvals.get(name, Imm(UNDEFINED)))
            for fdecl in ast.function_decls(node.body):
                self.assign(fdecl.name, self.closure(fdecl))
        else:
            for fdecl in ast.function_decls(self.lowering.program.body):
                self.assign(fdecl.name, self.closure(fdecl))

    # -- naming and blocks --

    def fresh(self, hint) -> str:
        self.nvals += 1
        hint = hint.lstrip("#") or "t"
        return f"{hint}.{self.nvals}"

    def new_block(self) -> Block:
        b = Block(f"b{self.nblocks}")
        self.nblocks += 1
        self.fn.blocks[b.id] = b
        self.preds[b.id] = []
        self.defs[b.id] = {}
        return b

    def dead_block(self):
        b = self.new_block()
        self.seal(b.id)
        self.cur = b

    # -- emission --

    def emit(self, op, args, dest=None, attr=None, hint="t"):
        if dest is None and hint is not None:
            dest = self.fresh(hint)
        self.cur.instrs.append(Instr(op, list(args), dest, attr))
        return dest

    def effect(self, op, args, attr=None):
        self.cur.instrs.append(Instr(op, list(args), None, attr))

    def terminate(self, op, args, targets, dest=None, attr=None):
        b = self.cur
        b.term = Instr(op, list(args), dest, attr, list(targets))
        for t in targets:
            self.preds[t].append(b.id)

    def jump(self, target: Block):
        self.terminate("jump", [], [target.id])

    # -- Braun SSA construction --

    def write(self, var, bid, value):
        self.defs[bid][var] = value

    def read(self, var, bid):
        d = self.defs[bid]
        if var in d:
            return d[var]
        return self.read_recursive(var, bid)

    def read_recursive(self, var, bid):
        if bid not in self.sealed:
            phi = self.new_phi(var, bid)
            self.incomplete.setdefault(bid, {})[var] = phi
            val = phi.dest
        elif len(self.preds[bid]) == 0:
            val = Imm(UNDEFINED)
        elif len(self.preds[bid]) == 1:
            val = self.read(var, self.preds[bid][0])
        else:
            phi = self.new_phi(var, bid)
            self.write(var, bid, phi.dest)
            self.add_phi_operands(var, phi, bid)
            val = phi.dest
        self.write(var, bid, val)
        return val

    def new_phi(self, var, bid) -> Phi:
        phi = Phi(self.fresh(var), {})
        self.fn.blocks[bid].phis.append(phi)
        self.phi_block[phi.dest] = bid
        return phi

    def add_phi_operands(self, var, phi, bid):
        for p in self.preds[bid]:
            phi.incoming[p] = self.read(var, p)

    def seal(self, bid):
        for var, phi in self.incomplete.pop(bid, {}).items():
            self.add_phi_operands(var, phi, bid)
        self.sealed.add(bid)

    # -- variables --

    def read_name(self, name):
        if name in self.cells:
            return self.emit("cell_get", [self.cells[name]], hint=name)
        if name in self.free_cells:
            return self.emit("cell_get", [self.free_cells[name]], hint=name)
        if name in self.locals:
            return self.read(name, self.cur.id)
        return self.emit("global_get", [], attr=name, hint=name)

    def assign(self, name, value):
        if name in self.cells:
            self.effect("cell_set", [self.cells[name], value])
        elif name in self.free_cells:
            self.effect("cell_set", [self.free_cells[name], value])
        elif name in self.locals:
            self.write(name, self.cur.id, value)
        else:
            self.effect("global_put", [value], attr=name)

    def temp(self):
        self.ntemps += 1
        return f"#t{self.ntemps}"

    # -- statements --

    def stmts(self, body):
        for s in body:
            self.stmt(s)

    def stmt(self, s):
        if isinstance(s, ast.ExprStmt):
            self.expr(s.expr)
        elif isinstance(s, ast.VarDecl):
            for name, init in s.decls:
                if init is not None:
                    self.assign(name, self.expr(init))
        elif isinstance(s, ast.Function):
            pass  # hoisted
        elif isinstance(s, ast.Return):
            v = self.expr(s.value) if s.value is not None else Imm(UNDEFINED)
            self.terminate("ret", [v], [])
            self.dead_block()
        elif isinstance(s, ast.If):
            then_b = self.new_block()
            else_b = self.new_block() if s.orelse is not None else None
            join = self.new_block()
            self.cond(s.test, then_b, else_b or join)
            self.seal(then_b.id)
            self.cur = then_b
            self.stmts(s.then)
            self.jump(join)
            if else_b is not None:
                self.seal(else_b.id)
                self.cur = else_b
                self.stmts(s.orelse)
                self.jump(join)
            self.seal(join.id)
            self.cur = join
        elif isinstance(s, ast.While):
            header = self.new_block()
            self.jump(header)
            body, exit_b = self.new_block(), self.new_block()
            self.cur = header
            self.cond(s.test, body, exit_b)
            self.seal(body.id)
            self.cur = body
            self.loops.append((header, exit_b))
            self.stmts(s.body)
            self.loops.pop()
            self.jump(header)
            self.seal(header.id)
            self.seal(exit_b.id)
            self.cur = exit_b
        elif isinstance(s, ast.For):
            if s.init is not None:
                self.stmt(s.init)
            header = self.new_block()
            self.jump(header)
            body, cont, exit_b = self.new_block(), self.new_block(), self.new_block()
            self.cur = header
            if s.test is not None:
                self.cond(s.test, body, exit_b)
            else:
                self.jump(body)
            self.seal(body.id)
            self.cur = body
            self.loops.append((cont, exit_b))
            self.stmts(s.body)
            self.loops.pop()
            self.jump(cont)
            self.seal(cont.id)
            self.cur = cont
            if s.update is not None:
                self.expr(s.update)
            self.jump(header)
            self.seal(header.id)
            self.seal(exit_b.id)
            self.cur = exit_b
        elif isinstance(s, (ast.Break, ast.Continue)):
            if not self.loops:
                raise LoweringError(f"{s.pos[0]}:{s.pos[1]}: {type(s).__name__.lower()} outside loop")
            cont, brk = self.loops[-1]
            self.jump(brk if isinstance(s, ast.Break) else cont)
            self.dead_block()
        else:
            raise LoweringError(f"unsupported statement {type(s).__name__}")

    # -- conditions --

    def cond(self, e, t: Block, f: Block):
        """Branch to ``t`` or ``f`` on the truthiness of ``e``."""
        if isinstance(e, ast.Unary) and e.op == "!":
            return self.cond(e.operand, f, t)
        if isinstance(e, ast.Logical):
            mid = self.new_block()
            if e.op == "&&":
                self.cond(e.left, mid, f)
            else:
                self.cond(e.left, t, mid)
            self.seal(mid.id)
            self.cur = mid
            return self.cond(e.right, t, f)
        if isinstance(e, ast.Literal):
            from .values import truthy

            return self.jump(t if truthy(e.value) else f)
        if isinstance(e, ast.Binary) and e.op in ("<", "<=", ">", ">=", "==", "!="):
            a = self.expr(e.left)
            b = self.expr(e.right)
            op, args, targets = {
                "<": ("prim_lt", [a, b], [t, f]),
                "<=": ("prim_le", [a, b], [t, f]),
                ">": ("prim_lt", [b, a], [t, f]),
                ">=": ("prim_le", [b, a], [t, f]),
                "==": ("prim_eq", [a, b], [t, f]),
                "!=": ("prim_eq", [a, b], [f, t]),
            }[e.op]
            return self.terminate(op, args, [x.id for x in targets])
        v = self.expr(e)
        self.terminate("prim_truthy", [v], [t.id, f.id])

    def materialize(self, e):
        """Value of a boolean-producing expression via control flow and a phi."""
        tmp = self.temp()
        t, f, join = self.new_block(), self.new_block(), self.new_block()
        self.cond(e, t, f)
        for blk, val in ((t, TRUE), (f, FALSE)):
            self.seal(blk.id)
            self.cur = blk
            self.write(tmp, blk.id, Imm(val))
            self.jump(join)
        self.seal(join.id)
        self.cur = join
        return self.read(tmp, join.id)

    # -- expressions --

    def expr(self, e):
        if isinstance(e, ast.Literal):
            return Imm(e.value)
        if isinstance(e, ast.Ident):
            return self.read_name(e.name)
        if isinstance(e, ast.Unary):
            if e.op == "-":
                return self.emit("prim_neg", [self.expr(e.operand)])
            return self.materialize(e)
        if isinstance(e, ast.Binary):
            if e.op in ("<", "<=", ">", ">=", "==", "!="):
                return self.materialize(e)
            a = self.expr(e.left)
            b = self.expr(e.right)
            return self.emit(BINOP_PRIMS[e.op], [a, b])
        if isinstance(e, ast.Logical):
            tmp = self.temp()
            left = self.expr(e.left)
            self.write(tmp, self.cur.id, left)
            rhs_b, join = self.new_block(), self.new_block()
            if e.op == "&&":
                self.terminate("prim_truthy", [left], [rhs_b.id, join.id])
            else:
                self.terminate("prim_truthy", [left], [join.id, rhs_b.id])
            self.seal(rhs_b.id)
            self.cur = rhs_b
            v = self.expr(e.right)
            self.write(tmp, self.cur.id, v)
            self.jump(join)
            self.seal(join.id)
            self.cur = join
            return self.read(tmp, join.id)
        if isinstance(e, ast.Conditional):
            tmp = self.temp()
            t, f, join = self.new_block(), self.new_block(), self.new_block()
            self.cond(e.test, t, f)
            for blk, sub in ((t, e.then), (f, e.orelse)):
                self.seal(blk.id)
                self.cur = blk
                v = self.expr(sub)
                self.write(tmp, self.cur.id, v)
                self.jump(join)
            self.seal(join.id)
            self.cur = join
            return self.read(tmp, join.id)
        if isinstance(e, ast.Assign):
            return self.assignment(e)
        if isinstance(e, ast.Update):
            return self.update(e)
        if isinstance(e, ast.Member):
            o = self.expr(e.obj)
            return self.emit("prim_get", [o], attr=e.name)
        if isinstance(e, ast.Index):
            a = self.expr(e.obj)
            i = self.expr(e.index)
            return self.emit("prim_index_get", [a, i])
        if isinstance(e, ast.Call):
            f = self.expr(e.callee)
            args = [self.expr(a) for a in e.args]
            cont = self.new_block()
            r = self.fresh("r")
            self.terminate("prim_call", [f] + args, [cont.id], dest=r)
            self.seal(cont.id)
            self.cur = cont
            return r
        if isinstance(e, ast.ArrayLit):
            items = [self.expr(x) for x in e.items]
            return self.emit("new_array", items, hint="arr")
        if isinstance(e, ast.ObjectLit):
            args = []
            for k, v in e.pairs:
                val = self.expr(v)
                args += [Imm(k), val]
            return self.emit("new_object", args, hint="obj")
        if isinstance(e, ast.Function):
            return self.closure(e)
        raise LoweringError(f"unsupported expression {type(e).__name__}")

    def closure(self, node):
        info = self.lowering.resolver.infos[id(node)]
        self.lowering.lower_function(info)
        cells = []
        for name in info.free:
            if name in self.cells:
                cells.append(self.cells[name])
            elif name in self.free_cells:
                cells.append(self.free_cells[name])
            else:
                raise LoweringError(f"free variable {name} not available in {self.fn.name}")
        return self.emit("make_closure", cells, attr=info.ir_name, hint="fn")

    def _store_target(self, target, value, base=None):
        if isinstance(target, ast.Ident):
            self.assign(target.name, value)
        elif isinstance(target, ast.Member):
            self.emit("prim_put", [base[0], value], attr=target.name, hint=None)
        else:
            self.emit("prim_index_put", [base[0], base[1], value], hint=None)

    def _load_target(self, target):
        """Evaluate the target's base operands and read its current value."""
        if isinstance(target, ast.Ident):
            return None, self.read_name(target.name)
        if isinstance(target, ast.Member):
            o = self.expr(target.obj)
            return (o,), self.emit("prim_get", [o], attr=target.name)
        a = self.expr(target.obj)
        i = self.expr(target.index)
        return (a, i), self.emit("prim_index_get", [a, i])

    def assignment(self, e: ast.Assign):
        target = e.target
        if e.op == "=":
            base = None
            if isinstance(target, ast.Member):
                base = (self.expr(target.obj),)
            elif isinstance(target, ast.Index):
                base = (self.expr(target.obj), self.expr(target.index))
            v = self.expr(e.value)
            self._store_target(target, v, base)
            return v
        base, old = self._load_target(target)
        rhs = self.expr(e.value)
        v = self.emit(BINOP_PRIMS[e.op[:-1]], [old, rhs])
        self._store_target(target, v, base)
        return v

    def update(self, e: ast.Update):
        base, old = self._load_target(e.target)
        op = "prim_add" if e.op == "++" else "prim_sub"
        new = self.emit(op, [old, Imm(1)])
        self._store_target(e.target, new, base)
        return new if e.prefix else old

    # -- finish --

    def finish(self) -> IrFunction:
        if self.cur.term is None:
            self.terminate("ret", [Imm(UNDEFINED)], [])
        for bid in list(self.fn.blocks):
            if bid not in self.sealed:
                self.seal(bid)
        cleanup_ssa(self.fn)
        return self.fn


BINOP_PRIMS = {
    "+": "prim_add", "-": "prim_sub", "*": "prim_mul", "/": "prim_div", "%": "prim_mod",
    "&": "prim_and", "|": "prim_or", "^": "prim_xor", "<<": "prim_shl", ">>": "prim_shr",
}


def remove_unreachable(fn: IrFunction):
    seen = {fn.entry}
    stack = [fn.entry]
    while stack:
        b = fn.blocks[stack.pop()]
        for s in b.succs:
            if s not in seen:
                seen.add(s)
                stack.append(s)
    for bid in [b for b in fn.blocks if b not in seen]:
        del fn.blocks[bid]
    for b in fn.blocks.values():
        for ph in b.phis:
            for p in [p for p in ph.incoming if p not in seen]:
                del ph.incoming[p]


def substitute(fn: IrFunction, repl: dict):
    def res(x):
        while is_var(x) and x in repl:
            x = repl[x]
        return x

    for b in fn.blocks.values():
        for ph in b.phis:
            for p in ph.incoming:
                ph.incoming[p] = res(ph.incoming[p])
        for ins in b.instrs + ([b.term] if b.term else []):
            ins.args = [res(a) for a in ins.args]


def cleanup_ssa(fn: IrFunction):
    """Drop unreachable blocks, trivial phis and dead phis."""
    remove_unreachable(fn)
    changed = True
    while changed:
        changed = False
        repl = {}
        for b in fn.blocks.values():
            keep = []
            for ph in b.phis:
                ops = {v for v in ph.incoming.values() if v != ph.dest}
                if len(ops) == 1:
                    repl[ph.dest] = ops.pop()
                    changed = True
                elif not ops:
                    repl[ph.dest] = Imm(UNDEFINED)
                    changed = True
                else:
                    keep.append(ph)
            b.phis = keep
        if repl:
            substitute(fn, repl)
    # dead phis: not used by anything except (transitively) dead phis
    while True:
        used = set()
        for b in fn.blocks.values():
            for ph in b.phis:
                used.update(v for v in ph.incoming.values() if is_var(v) and v != ph.dest)
            for ins in b.instrs + [b.term]:
                used.update(ins.uses())
        dead = False
        for b in fn.blocks.values():
            n = len(b.phis)
            b.phis = [ph for ph in b.phis if ph.dest in used]
            dead |= len(b.phis) != n
        if not dead:
            break


class Lowering:
    def __init__(self, program: ast.Program):
        self.program = program
        self.resolver = Resolver()
        self.top = self.resolver.run(program)
        self.functions = {}
        self.done = set()

    def lower_function(self, info: FnInfo):
        if info.ir_name in self.done:
            return
        self.done.add(info.ir_name)
        fl = FnLowerer(self, info)
        body = self.program.body if info.node is None else info.node.body
        fl.stmts(body)
        self.functions[info.ir_name] = fl.finish()

    def run(self) -> IrProgram:
        self.lower_function(self.top)
        # keep a stable order: top-level code first, then by name
        funcs = {self.top.ir_name: self.functions[self.top.ir_name]}
        for name in sorted(self.functions):
            funcs.setdefault(name, self.functions[name])
        return IrProgram(funcs, self.top.ir_name)


def lower(program: ast.Program, check=True) -> IrProgram:
    prog = Lowering(program).run()
    if check:
        for fn in prog.functions.values():
            diags = validate(fn)
            if diags:
                raise LoweringError(f"invalid IR for {fn.name}: {diags[:3]}")
    return prog
