"""MiniDyn abstract syntax tree."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

Pos = tuple  # (line, column)


@dataclass(eq=False)
class Node:
    pos: Pos = field(default=(0, 0), kw_only=True)


# -- expressions --


@dataclass(eq=False)
class Literal(Node):
    value: Any  # int, float, str or a JSConst


@dataclass(eq=False)
class Ident(Node):
    name: str


@dataclass(eq=False)
class Unary(Node):
    op: str  # '-', '!'
    operand: Node


@dataclass(eq=False)
class Binary(Node):
    op: str
    left: Node
    right: Node


@dataclass(eq=False)
class Logical(Node):
    op: str  # '&&', '||'
    left: Node
    right: Node


@dataclass(eq=False)
class Conditional(Node):
    test: Node
    then: Node
    orelse: Node


@dataclass(eq=False)
class Assign(Node):
    op: str  # '=', '+=', ...
    target: Node  # Ident, Member or Index
    value: Node


@dataclass(eq=False)
class Update(Node):
    op: str  # '++', '--'
    prefix: bool
    target: Node


@dataclass(eq=False)
class Member(Node):
    obj: Node
    name: str


@dataclass(eq=False)
class Index(Node):
    obj: Node
    index: Node


@dataclass(eq=False)
class Call(Node):
    callee: Node
    args: list


@dataclass(eq=False)
class ArrayLit(Node):
    items: list


@dataclass(eq=False)
class ObjectLit(Node):
    pairs: list  # [(key, expr)]


@dataclass(eq=False)
class Function(Node):
    name: Optional[str]
    params: list
    body: list
    is_decl: bool = False


# -- statements --


@dataclass(eq=False)
class VarDecl(Node):
    decls: list  # [(name, expr or None)]


@dataclass(eq=False)
class ExprStmt(Node):
    expr: Node


@dataclass(eq=False)
class If(Node):
    test: Node
    then: list
    orelse: Optional[list]


@dataclass(eq=False)
class While(Node):
    test: Node
    body: list


@dataclass(eq=False)
class For(Node):
    init: Optional[Node]  # VarDecl, ExprStmt or None
    test: Optional[Node]
    update: Optional[Node]
    body: list


@dataclass(eq=False)
class Return(Node):
    value: Optional[Node]


@dataclass(eq=False)
class Break(Node):
    pass


@dataclass(eq=False)
class Continue(Node):
    pass


@dataclass(eq=False)
class Program(Node):
    body: list


def var_names(body) -> list:
    """Names declared with ``var`` in a function body (hoisted, nested functions excluded)."""
    out = []

    def visit(stmts):
        for s in stmts:
            if isinstance(s, VarDecl):
                out.extend(n for n, _ in s.decls)
            elif isinstance(s, If):
                visit(s.then)
                if s.orelse:
                    visit(s.orelse)
            elif isinstance(s, While):
                visit(s.body)
            elif isinstance(s, For):
                if isinstance(s.init, VarDecl):
                    out.extend(n for n, _ in s.init.decls)
                visit(s.body)

    visit(body)
    seen = set()
    return [n for n in out if not (n in seen or seen.add(n))]


def function_decls(body) -> list:
    """Function declarations hoisted to the top of a body (block-nested ones included)."""
    out = []

    def visit(stmts):
        for s in stmts:
            if isinstance(s, Function) and s.is_decl:
                out.append(s)
            elif isinstance(s, If):
                visit(s.then)
                if s.orelse:
                    visit(s.orelse)
            elif isinstance(s, (While, For)):
                visit(s.body)

    visit(body)
    return out
