import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from minidyn import values as V
from minidyn.values import (
    FALSE, INT32_MAX, INT32_MIN, NULL, TRUE, UNDEFINED, JSArray, JSObject, JSRuntimeError, TypeTag,
    tag_of,
)

i32 = st.integers(INT32_MIN, INT32_MAX)
edge_i32 = st.sampled_from([0, 1, -1, 2, INT32_MAX, INT32_MIN, INT32_MAX - 1, INT32_MIN + 1, 46341, 65536])
ints = st.one_of(i32, edge_i32)
floats = st.floats(allow_nan=True, allow_infinity=True)


def test_seven_tags():
    assert len(TypeTag) == 7
    assert {t.value for t in TypeTag} == {"int32", "float64", "const", "string", "object", "array", "closure"}


@pytest.mark.parametrize(
    "v,tag",
    [(3, TypeTag.INT32), (3.5, TypeTag.FLOAT64), (TRUE, TypeTag.CONST), (UNDEFINED, TypeTag.CONST),
     ("s", TypeTag.STRING), (JSObject({}), TypeTag.OBJECT), (JSArray([]), TypeTag.ARRAY),
     (V.Closure("f", "f"), TypeTag.CLOSURE)],
)
def test_tag_of(v, tag):
    assert tag_of(v) is tag


def test_add_i32_ovf_examples():
    assert V.add_i32_ovf(1, 2) == 3
    assert V.add_i32_ovf(2147483647, 1) is None
    assert V.sub_i32_ovf(-2147483648, 1) is None
    assert V.mul_i32_ovf(-2147483648, -1) is None
    assert V.div_i32_chk(-2147483648, -1) is None


def test_prim_add_examples():
    assert V.prim_add(1, 2) == 3 and type(V.prim_add(1, 2)) is int
    r = V.prim_add(2147483647, 1)
    assert r == 2147483648.0 and type(r) is float
    assert V.prim_add("a", 1) == "a1"
    assert V.prim_add(1.5, "x") == "1.5x"
    assert V.prim_add(TRUE, NULL) == "truenull"


@given(ints, ints)
def test_checked_ops_match_64bit_oracle(x, y):
    for op, exact in ((V.add_i32_ovf, x + y), (V.sub_i32_ovf, x - y), (V.mul_i32_ovf, x * y)):
        r = op(x, y)
        if INT32_MIN <= exact <= INT32_MAX:
            assert r == exact
        else:
            assert r is None


@given(ints, ints)
def test_int_arith_result_tags(x, y):
    """int32 op int32 stays int32 unless the exact result leaves the range."""
    for prim, exact in ((V.prim_add, x + y), (V.prim_sub, x - y), (V.prim_mul, x * y)):
        r = prim(x, y)
        if INT32_MIN <= exact <= INT32_MAX:
            assert type(r) is int and r == exact
        else:
            assert type(r) is float and r == float(exact)


@given(ints, ints)
def test_division_exact_int_else_float(x, y):
    r = V.prim_div(x, y)
    if y != 0 and x % y == 0 and INT32_MIN <= x // y <= INT32_MAX:
        assert type(r) is int and r == x // y
    else:
        assert type(r) is float


@given(ints, ints)
def test_bitwise_is_int32(x, y):
    for prim in (V.prim_and, V.prim_or, V.prim_xor, V.prim_shl, V.prim_shr):
        r = prim(x, y)
        assert type(r) is int and INT32_MIN <= r <= INT32_MAX
    assert V.prim_and(x, y) == x & y
    assert V.prim_shl(x, y) == V.wrap_i32(x << (y & 31))
    assert V.prim_shr(x, y) == x >> (y & 31)


@given(floats)
def test_f64_to_i32_range(x):
    r = V.f64_to_i32(x)
    assert type(r) is int and INT32_MIN <= r <= INT32_MAX
    if not (math.isnan(x) or math.isinf(x)) and INT32_MIN <= math.trunc(x) <= INT32_MAX:
        assert r == math.trunc(x)


@given(st.one_of(ints, floats), st.one_of(ints, floats))
def test_comparisons_follow_float_order(x, y):
    assert V.prim_lt(x, y) == (float(x) < float(y))
    assert V.prim_le(x, y) == (float(x) <= float(y))
    assert V.prim_eq(x, y) == (float(x) == float(y))


def test_equality_without_coercion():
    assert V.prim_eq(1, 1.0)
    assert not V.prim_eq(1, "1")
    assert V.prim_eq("ab", "ab")
    assert not V.prim_eq(NULL, UNDEFINED)
    o = JSObject({})
    assert V.prim_eq(o, o) and not V.prim_eq(o, JSObject({}))


@pytest.mark.parametrize(
    "call,msg",
    [
        (lambda: V.prim_sub("a", 1), "TypeError: - on non-numbers"),
        (lambda: V.prim_lt(NULL, 1), "TypeError: < on non-numbers"),
        (lambda: V.prim_and("a", 1), "TypeError: bitwise operator on non-number"),
        (lambda: V.prim_neg("a"), "TypeError: unary - on non-number"),
        (lambda: V.prim_get(1, "x"), "TypeError: cannot read property 'x'"),
        (lambda: V.prim_index_get(1, 0), "TypeError: invalid indexing"),
        (lambda: V.prim_index_put(JSArray([]), "x", 1), "TypeError: invalid indexed store"),
    ],
)
def test_runtime_errors(call, msg):
    with pytest.raises(JSRuntimeError, match=msg):
        call()


def test_truthiness():
    for v in (0, 0.0, math.nan, "", FALSE, NULL, UNDEFINED):
        assert not V.truthy(v)
    for v in (1, -0.5, "0", TRUE, JSObject({}), JSArray([])):
        assert V.truthy(v)


def test_strings_and_display():
    assert V.to_string(1.0) == "1"
    assert V.to_string(0.5) == "0.5"
    assert V.to_string(1e21) == "1e+21"
    assert V.to_string(math.inf) == "Infinity"
    assert V.to_string(JSArray([1, "a"])) == "1,a"
    assert V.display(3) == "i32:3"
    assert V.display(3.0) == "f64:3.0"
    assert V.display("a") == "str:'a'"


def test_array_access():
    a = JSArray([1, 2])
    assert V.prim_index_get(a, 1) == 2
    assert V.prim_index_get(a, 5) is UNDEFINED
    V.prim_index_put(a, 3, 9)
    assert V.prim_get(a, "length") == 4
    assert V.prim_index_get("abc", 1) == "b"


@given(ints)
def test_neg_matches_oracle(x):
    r = V.prim_neg(x)
    if x == INT32_MIN:
        assert r == 2147483648.0 and type(r) is float
    elif x == 0:
        assert type(r) is int and r == 0
    else:
        assert r == -x and type(r) is int
