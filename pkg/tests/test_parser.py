import pytest

from minidyn import ast
from minidyn.parser import MiniDynSyntaxError, number_value, parse
from minidyn.reference import run_reference


def only_function(src):
    prog = parse(src)
    fns = [s for s in prog.body if isinstance(s, ast.Function)]
    assert len(fns) == 1
    return fns[0]


def test_return_integer_literal():
    fn = only_function("function f() { return 1; }")
    (ret,) = fn.body
    assert isinstance(ret, ast.Return)
    assert isinstance(ret.value, ast.Literal)
    assert ret.value.value == 1 and type(ret.value.value) is int


def test_sum_has_for_loop_and_two_locals(corpus):
    fn = next(s for s in parse(corpus["sum"]).body if isinstance(s, ast.Function) and s.name == "sum")
    assert fn.params == ["n"]
    loop = fn.body[0]
    assert isinstance(loop, ast.For)
    assert isinstance(loop.init, ast.VarDecl)
    assert [name for name, _ in loop.init.decls] == ["i", "s"]
    assert ast.var_names(fn.body) == ["i", "s"]


@pytest.mark.parametrize(
    "src",
    ["x = ;", "function f( { }", "var = 3;", "f(1,;", "if (x) {", "1 +", "x++ ++;"],
)
def test_syntax_errors(src):
    with pytest.raises(MiniDynSyntaxError):
        parse(src)


def test_syntax_error_position():
    with pytest.raises(MiniDynSyntaxError) as ei:
        parse("var a = 1;\nvar b = ;\n")
    assert (ei.value.line, ei.value.col) == (2, 9)
    assert str(ei.value).startswith("2:9:")


@pytest.mark.parametrize(
    "text,value",
    [("0", 0), ("42", 42), ("2147483647", 2147483647), ("2147483648", 2147483648.0),
     ("0x10", 16), ("1.5", 1.5), ("3.0", 3.0), ("1e3", 1000.0), (".5", 0.5)],
)
def test_number_literals(text, value):
    v = number_value(text)
    assert v == value and type(v) is type(value)


@pytest.mark.parametrize(
    "expr,expected",
    [
        ("1 + 2 * 3", "i32:7"),
        ("(1 + 2) * 3", "i32:9"),
        ("10 - 4 - 3", "i32:3"),
        ("1 < 2 == true", "true"),
        ("1 | 2 & 3", "i32:3"),
        ("-2 * -3", "i32:6"),
        ("!0 && 5", "i32:5"),
        ("0 || null", "null"),
        ("1 ? 2 : 3 ? 4 : 5", "i32:2"),
        ("'a' + 1 + 2", "str:'a12'"),
        ("1 + 2 + 'a'", "str:'3a'"),
        ("[1, 2, 3].length", "i32:3"),
        ("({x: 4}).x", "i32:4"),
        ("5 % 3 << 2", "i32:8"),
        ("'a\\nb'.length", "i32:3"),
    ],
)
def test_precedence_and_associativity(expr, expected):
    (status, value), _ = run_reference(f"function main() {{ return {expr}; }}")
    assert (status, value) == ("ok", expected)


def test_comments_and_statements():
    src = """
    // line comment
    /* block
       comment */
    function main() {
        var a = 0, b;
        while (a < 3) { a++; if (a == 2) continue; }
        for (;;) { break; }
        b = a;
        b += 2; b -= 1; b *= 3; b |= 0;
        return b;
    }
    """
    assert run_reference(src)[0] == ("ok", "i32:12")


def test_positions_recorded():
    fn = only_function("\n\nfunction f() { return 1; }")
    assert fn.pos[0] == 3
