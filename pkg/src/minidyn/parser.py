"""Tokenizer and recursive-descent parser for MiniDyn source."""

from __future__ import annotations

import re

from . import ast
from .values import CONSTS, INT32_MAX


class MiniDynSyntaxError(Exception):
    def __init__(self, msg, line, col):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


KEYWORDS = {
    "var", "function", "return", "if", "else", "while", "for", "break",
    "continue", "true", "false", "null", "undefined",
}

PUNCT = sorted(
    """=== !== <<= >>= == != <= >= << >> && || ++ -- += -= *= /= %= &= |= ^=
    + - * / % & | ^ ! < > = ( ) { } [ ] ; , . ? :""".split(),
    key=len,
    reverse=True,
)

TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*|/\*.*?\*/)
  | (?P<num>0[xX][0-9a-fA-F]+|(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<str>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
  | (?P<name>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<punct>"""
    + "|".join(re.escape(p) for p in PUNCT)
    + r""")
    """,
    re.VERBOSE | re.DOTALL,
)

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "0": "\0", "\\": "\\", "'": "'", '"': '"'}


def _unescape(body: str) -> str:
    return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), body)


def number_value(text: str):
    """Integer literals below 2**31 in magnitude are int32, everything else float64."""
    if text[:2] in ("0x", "0X"):
        n = int(text, 16)
        return n if n <= INT32_MAX else float(n)
    if re.fullmatch(r"\d+", text):
        n = int(text)
        return n if n <= INT32_MAX else float(n)
    return float(text)


class Token:
    __slots__ = ("kind", "text", "value", "line", "col")

    def __init__(self, kind, text, value, line, col):
        self.kind, self.text, self.value, self.line, self.col = kind, text, value, line, col

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r})"


def tokenize(src: str) -> list:
    toks = []
    pos, line, line_start = 0, 1, 0
    n = len(src)
    while pos < n:
        m = TOKEN_RE.match(src, pos)
        col = pos - line_start + 1
        if not m:
            raise MiniDynSyntaxError(f"unexpected character {src[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "num":
            toks.append(Token("num", text, number_value(text), line, col))
        elif kind == "str":
            toks.append(Token("str", text, _unescape(text[1:-1]), line, col))
        elif kind == "name":
            toks.append(Token("kw" if text in KEYWORDS else "name", text, text, line, col))
        elif kind == "punct":
            toks.append(Token("punct", text, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            line_start = m.start() + text.rindex("\n") + 1
        pos = m.end()
    toks.append(Token("eof", "", None, line, pos - line_start + 1))
    return toks


ASSIGN_OPS = {"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="}

# binary precedence, higher binds tighter
BINARY_PREC = {
    "||": 1,
    "&&": 2,
    "|": 3,
    "^": 4,
    "&": 5,
    "==": 6, "!=": 6, "===": 6, "!==": 6,
    "<": 7, "<=": 7, ">": 7, ">=": 7,
    "<<": 8, ">>": 8,
    "+": 9, "-": 9,
    "*": 10, "/": 10, "%": 10,
}


class Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0

    # -- helpers --

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        raise MiniDynSyntaxError(msg, tok.line, tok.col)

    def at(self, text) -> bool:
        t = self.tok
        return t.kind in ("punct", "kw") and t.text == text

    def accept(self, text) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        t = self.tok
        if t.kind != "name":
            self.error(f"expected identifier, found {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    def pos(self):
        return (self.tok.line, self.tok.col)

    # -- statements --

    def parse_program(self) -> ast.Program:
        pos = self.pos()
        body = []
        while self.tok.kind != "eof":
            body.append(self.statement())
        return ast.Program(body, pos=pos)

    def block(self) -> list:
        self.expect("{")
        body = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("unterminated block")
            body.append(self.statement())
        self.expect("}")
        return body

    def body(self) -> list:
        if self.at("{"):
            return self.block()
        return [self.statement()]

    def statement(self):
        pos = self.pos()
        if self.at("{"):
            # bare blocks have no scope of their own
            return ast.If(ast.Literal(CONSTS["true"], pos=pos), self.block(), None, pos=pos)
        if self.accept(";"):
            return ast.ExprStmt(ast.Literal(CONSTS["undefined"], pos=pos), pos=pos)
        if self.accept("var"):
            d = self.var_decls(pos)
            self.expect(";")
            return d
        if self.at("function"):
            self.i += 1
            fn = self.function_rest(pos, require_name=True)
            fn.is_decl = True
            return fn
        if self.accept("return"):
            value = None
            if not self.at(";"):
                value = self.expression()
            self.expect(";")
            return ast.Return(value, pos=pos)
        if self.accept("if"):
            self.expect("(")
            test = self.expression()
            self.expect(")")
            then = self.body()
            orelse = self.body() if self.accept("else") else None
            return ast.If(test, then, orelse, pos=pos)
        if self.accept("while"):
            self.expect("(")
            test = self.expression()
            self.expect(")")
            return ast.While(test, self.body(), pos=pos)
        if self.accept("for"):
            return self.for_rest(pos)
        if self.accept("break"):
            self.expect(";")
            return ast.Break(pos=pos)
        if self.accept("continue"):
            self.expect(";")
            return ast.Continue(pos=pos)
        e = self.expression()
        self.expect(";")
        return ast.ExprStmt(e, pos=pos)

    def var_decls(self, pos) -> ast.VarDecl:
        decls = []
        while True:
            name = self.ident()
            init = self.assignment() if self.accept("=") else None
            decls.append((name, init))
            if not self.accept(","):
                break
        return ast.VarDecl(decls, pos=pos)

    def for_rest(self, pos):
        self.expect("(")
        init = None
        if self.accept("var"):
            init = self.var_decls(pos)
        elif not self.at(";"):
            init = ast.ExprStmt(self.expression(), pos=pos)
        self.expect(";")
        test = None if self.at(";") else self.expression()
        self.expect(";")
        update = None if self.at(")") else self.expression()
        self.expect(")")
        return ast.For(init, test, update, self.body(), pos=pos)

    def function_rest(self, pos, require_name=False) -> ast.Function:
        name = None
        if self.tok.kind == "name":
            name = self.ident()
        elif require_name:
            self.error("function declaration requires a name")
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                params.append(self.ident())
                if not self.accept(","):
                    break
        self.expect(")")
        return ast.Function(name, params, self.block(), pos=pos)

    # -- expressions --

    def expression(self):
        return self.assignment()

    def assignment(self):
        pos = self.pos()
        left = self.conditional()
        t = self.tok
        if t.kind == "punct" and t.text in ASSIGN_OPS:
            if not isinstance(left, (ast.Ident, ast.Member, ast.Index)):
                self.error("invalid assignment target")
            self.i += 1
            value = self.assignment()
            return ast.Assign(t.text, left, value, pos=pos)
        return left

    def conditional(self):
        pos = self.pos()
        test = self.binary(1)
        if self.accept("?"):
            then = self.assignment()
            self.expect(":")
            orelse = self.assignment()
            return ast.Conditional(test, then, orelse, pos=pos)
        return test

    def binary(self, min_prec):
        left = self.unary()
        while True:
            t = self.tok
            prec = BINARY_PREC.get(t.text) if t.kind == "punct" else None
            if prec is None or prec < min_prec:
                return left
            self.i += 1
            right = self.binary(prec + 1)
            op = {"===": "==", "!==": "!="}.get(t.text, t.text)
            pos = (t.line, t.col)
            if op in ("&&", "||"):
                left = ast.Logical(op, left, right, pos=pos)
            else:
                left = ast.Binary(op, left, right, pos=pos)

    def unary(self):
        pos = self.pos()
        if self.accept("-"):
            operand = self.unary()
            if isinstance(operand, ast.Literal) and type(operand.value) in (int, float):
                v = operand.value
                if type(v) is int and v == 0:
                    return ast.Literal(0, pos=pos)
                return ast.Literal(-v, pos=pos)
            return ast.Unary("-", operand, pos=pos)
        if self.accept("!"):
            return ast.Unary("!", self.unary(), pos=pos)
        if self.at("++") or self.at("--"):
            op = self.tok.text
            self.i += 1
            target = self.unary()
            self._check_target(target)
            return ast.Update(op, True, target, pos=pos)
        return self.postfix()

    def _check_target(self, target):
        if not isinstance(target, (ast.Ident, ast.Member, ast.Index)):
            self.error("invalid update target")

    def postfix(self):
        e = self.call_member()
        if self.at("++") or self.at("--"):
            op = self.tok.text
            self._check_target(e)
            pos = self.pos()
            self.i += 1
            return ast.Update(op, False, e, pos=pos)
        return e

    def call_member(self):
        e = self.primary()
        while True:
            pos = self.pos()
            if self.accept("."):
                t = self.tok
                if t.kind not in ("name", "kw"):
                    self.error("expected property name")
                self.i += 1
                e = ast.Member(e, t.text, pos=pos)
            elif self.accept("["):
                idx = self.expression()
                self.expect("]")
                e = ast.Index(e, idx, pos=pos)
            elif self.accept("("):
                args = []
                if not self.at(")"):
                    while True:
                        args.append(self.assignment())
                        if not self.accept(","):
                            break
                self.expect(")")
                e = ast.Call(e, args, pos=pos)
            else:
                return e

    def primary(self):
        t = self.tok
        pos = (t.line, t.col)
        if t.kind == "num":
            self.i += 1
            return ast.Literal(t.value, pos=pos)
        if t.kind == "str":
            self.i += 1
            return ast.Literal(t.value, pos=pos)
        if t.kind == "name":
            self.i += 1
            return ast.Ident(t.text, pos=pos)
        if t.kind == "kw" and t.text in CONSTS:
            self.i += 1
            return ast.Literal(CONSTS[t.text], pos=pos)
        if self.accept("function"):
            return self.function_rest(pos)
        if self.accept("("):
            e = self.expression()
            self.expect(")")
            return e
        if self.accept("["):
            items = []
            if not self.at("]"):
                while True:
                    items.append(self.assignment())
                    if not self.accept(","):
                        break
            self.expect("]")
            return ast.ArrayLit(items, pos=pos)
        if self.accept("{"):
            pairs = []
            if not self.at("}"):
                while True:
                    k = self.tok
                    if k.kind in ("name", "kw", "str"):
                        key = k.value if k.kind == "str" else k.text
                    else:
                        self.error("expected property key")
                    self.i += 1
                    self.expect(":")
                    pairs.append((key, self.assignment()))
                    if not self.accept(","):
                        break
            self.expect("}")
            return ast.ObjectLit(pairs, pos=pos)
        self.error(f"unexpected {t.text or 'end of input'!r}")


def parse(src: str) -> ast.Program:
    return Parser(src).parse_program()
