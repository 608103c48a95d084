"""Tagged runtime values and the low-level typed operations used by primitives.

Values are plain Python objects whose tag is derived from their type:

    int      -> int32   (always within [-2**31, 2**31))
    float    -> float64
    JSConst  -> const   (true, false, null, undefined)
    str      -> string
    JSObject -> object
    JSArray  -> array
    Closure  -> closure

The ``prim_*`` functions give the reference semantics of each operator.  The
compiled form of an operator is the inlined IR template in
:mod:`minidyn.templates`, which must agree with these functions.
"""

from __future__ import annotations

import enum
import math

INT32_MIN = -(2**31)
INT32_MAX = 2**31 - 1


class TypeTag(enum.Enum):
    INT32 = "int32"
    FLOAT64 = "float64"
    CONST = "const"
    STRING = "string"
    OBJECT = "object"
    ARRAY = "array"
    CLOSURE = "closure"

    @property
    def test_name(self) -> str:
        return TEST_NAMES[self]

    def __repr__(self):
        return self.value


ALL_TAGS = frozenset(TypeTag)

TEST_NAMES = {
    TypeTag.INT32: "is_i32",
    TypeTag.FLOAT64: "is_f64",
    TypeTag.CONST: "is_const",
    TypeTag.STRING: "is_string",
    TypeTag.OBJECT: "is_object",
    TypeTag.ARRAY: "is_array",
    TypeTag.CLOSURE: "is_closure",
}
TAG_BY_TEST = {name: tag for tag, name in TEST_NAMES.items()}


class JSRuntimeError(Exception):
    """A MiniDyn-level runtime error (the program faulted, not the VM)."""


class JSConst:
    __slots__ = ("name",)

    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return self.name


TRUE = JSConst("true")
FALSE = JSConst("false")
NULL = JSConst("null")
UNDEFINED = JSConst("undefined")
CONSTS = {c.name: c for c in (TRUE, FALSE, NULL, UNDEFINED)}


def js_bool(b: bool) -> JSConst:
    return TRUE if b else FALSE


class JSObject:
    __slots__ = ("props",)

    def __init__(self, props=None):
        self.props = props if props is not None else {}

    def __repr__(self):
        return f"JSObject({self.props!r})"


class JSArray:
    __slots__ = ("items",)

    def __init__(self, items=None):
        self.items = items if items is not None else []

    def __repr__(self):
        return f"JSArray({self.items!r})"


class Closure:
    """A function value.

    ``func`` is whatever the executing engine uses to identify code (an IR
    function for the VM, an AST node for the reference interpreter); ``env``
    holds captured cells.  ``native`` closures wrap a Python callable.
    """

    __slots__ = ("name", "func", "env", "native")

    def __init__(self, name, func=None, env=(), native=None):
        self.name = name
        self.func = func
        self.env = env
        self.native = native

    def __repr__(self):
        return f"<closure {self.name}>"


class Cell:
    """A mutable box holding a captured variable (typed as an object)."""

    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value

    def __repr__(self):
        return f"Cell({self.value!r})"


_TAG_BY_TYPE = {
    int: TypeTag.INT32,
    float: TypeTag.FLOAT64,
    JSConst: TypeTag.CONST,
    str: TypeTag.STRING,
    JSObject: TypeTag.OBJECT,
    JSArray: TypeTag.ARRAY,
    Closure: TypeTag.CLOSURE,
    Cell: TypeTag.OBJECT,
}


def tag_of(v) -> TypeTag:
    return _TAG_BY_TYPE[type(v)]


def is_int32(v) -> bool:
    return type(v) is int


def is_number(v) -> bool:
    t = type(v)
    return t is int or t is float


def fits_i32(n: int) -> bool:
    return INT32_MIN <= n <= INT32_MAX


def wrap_i32(n: int) -> int:
    return ((n + 2**31) % 2**32) - 2**31


def from_python(x):
    """Convert a host value (CLI/harness arguments) to a MiniDyn value."""
    if x is None:
        return NULL
    if isinstance(x, bool):
        return js_bool(x)
    if isinstance(x, int):
        return x if fits_i32(x) else float(x)
    if isinstance(x, (float, str, JSConst, JSObject, JSArray, Closure)):
        return x
    if isinstance(x, (list, tuple)):
        return JSArray([from_python(e) for e in x])
    if isinstance(x, dict):
        return JSObject({str(k): from_python(v) for k, v in x.items()})
    raise TypeError(f"cannot convert {x!r}")


# -- string conversion ------------------------------------------------------


def format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    if x == 0:
        return "0"
    if x.is_integer() and abs(x) < 1e21:
        return str(int(x))
    r = repr(x)
    if "e" in r:
        mant, exp = r.split("e")
        sign = exp[0] if exp[0] in "+-" else "+"
        digits = exp.lstrip("+-").lstrip("0") or "0"
        r = f"{mant}e{sign}{digits}"
    return r


def to_string(v, _seen=None) -> str:
    t = type(v)
    if t is str:
        return v
    if t is int:
        return str(v)
    if t is float:
        return format_float(v)
    if t is JSConst:
        return v.name
    if t is JSArray:
        seen = _seen or set()
        if id(v) in seen:
            return ""
        seen.add(id(v))
        parts = []
        for e in v.items:
            parts.append("" if e is NULL or e is UNDEFINED else to_string(e, seen))
        seen.discard(id(v))
        return ",".join(parts)
    if t is JSObject:
        return "[object Object]"
    if t is Closure:
        return "function"
    raise TypeError(f"not a MiniDyn value: {v!r}")


def display(v, _seen=None) -> str:
    """Canonical, tag-revealing rendering used to compare results across engines."""
    t = type(v)
    if t is int:
        return f"i32:{v}"
    if t is float:
        return f"f64:{v!r}"
    if t is str:
        return "str:" + repr(v)
    if t is JSConst:
        return v.name
    if t is Closure:
        return "closure"
    seen = _seen or set()
    if id(v) in seen:
        return "<cycle>"
    seen.add(id(v))
    if t is JSArray:
        out = "[" + ", ".join(display(e, seen) for e in v.items) + "]"
    else:
        out = "{" + ", ".join(f"{k}: {display(e, seen)}" for k, e in v.props.items()) + "}"
    seen.discard(id(v))
    return out


# -- low-level typed operations ---------------------------------------------
#
# Operand tags are guaranteed by the dispatching template, so these do not
# re-check.  Checked int ops return None on the failure (overflow) edge.


def add_i32_ovf(x: int, y: int):
    r = x + y
    return r if INT32_MIN <= r <= INT32_MAX else None


def sub_i32_ovf(x: int, y: int):
    r = x - y
    return r if INT32_MIN <= r <= INT32_MAX else None


def mul_i32_ovf(x: int, y: int):
    r = x * y
    return r if INT32_MIN <= r <= INT32_MAX else None


def div_i32_chk(x: int, y: int):
    """Exact int32 quotient, or None when the result is not an int32."""
    if y == 0 or x % y != 0:
        return None
    r = x // y
    return r if INT32_MIN <= r <= INT32_MAX else None


def mod_i32_chk(x: int, y: int):
    if y == 0:
        return None
    r = abs(x) % abs(y)
    return -r if x < 0 else r


def i32_to_f64(x: int) -> float:
    return float(x)


def f64_to_i32(x: float) -> int:
    if math.isnan(x) or math.isinf(x):
        return 0
    return wrap_i32(int(x))


def add_f64(x, y):
    return x + y


def sub_f64(x, y):
    return x - y


def mul_f64(x, y):
    return x * y


def div_f64(x: float, y: float) -> float:
    if y == 0:
        if x == 0 or math.isnan(x):
            return math.nan
        return math.copysign(math.inf, x) * math.copysign(1.0, y)
    return x / y


def mod_f64(x: float, y: float) -> float:
    if y == 0 or math.isnan(x) or math.isnan(y) or math.isinf(x):
        return math.nan
    if math.isinf(y):
        return x
    return math.fmod(x, y)


def neg_f64(x: float) -> float:
    return -x


def and_i32(x, y):
    return x & y


def or_i32(x, y):
    return x | y


def xor_i32(x, y):
    return x ^ y


def shl_i32(x, y):
    return wrap_i32(x << (y & 31))


def shr_i32(x, y):
    return x >> (y & 31)


def strcat(a: str, b: str) -> str:
    return a + b


def str_len(s: str) -> int:
    return len(s)


def str_char(s: str, i: int):
    return s[i] if 0 <= i < len(s) else UNDEFINED


def arr_len(a: JSArray) -> int:
    return len(a.items)


def arr_get(a: JSArray, i: int):
    items = a.items
    return items[i] if 0 <= i < len(items) else UNDEFINED


def arr_put(a: JSArray, i: int, v) -> None:
    if i < 0:
        return
    items = a.items
    if i < len(items):
        items[i] = v
    else:
        items.extend([UNDEFINED] * (i - len(items)))
        items.append(v)


def obj_get(o: JSObject, key: str):
    return o.props.get(key, UNDEFINED)


def obj_put(o: JSObject, key: str, v) -> None:
    o.props[key] = v


def new_object(*kv) -> JSObject:
    return JSObject({kv[i]: kv[i + 1] for i in range(0, len(kv), 2)})


def new_array(*items) -> JSArray:
    return JSArray(list(items))


def eq_ref(x, y) -> bool:
    """Equality for operands that are not both numbers."""
    tx = type(x)
    if tx is not type(y):
        return False
    if tx is str or tx is float or tx is int:
        return x == y
    return x is y


def truthy(v) -> bool:
    t = type(v)
    if t is JSConst:
        return v is TRUE
    if t is int:
        return v != 0
    if t is float:
        return not (v == 0 or math.isnan(v))
    if t is str:
        return len(v) > 0
    return True


# -- reference operator semantics -------------------------------------------


def _err(msg):
    raise JSRuntimeError(msg)


def _to_f64(v) -> float:
    return float(v)


def _arith(x, y, int_op, f64_op):
    tx, ty = type(x), type(y)
    if tx is int and ty is int:
        r = int_op(x, y)
        if r is not None:
            return r
        return f64_op(float(x), float(y))
    if (tx is int or tx is float) and (ty is int or ty is float):
        return f64_op(float(x), float(y))
    return None


def prim_add(x, y):
    r = _arith(x, y, add_i32_ovf, add_f64)
    if r is None:
        return to_string(x) + to_string(y)
    return r


def prim_sub(x, y):
    r = _arith(x, y, sub_i32_ovf, sub_f64)
    return _err("TypeError: - on non-numbers") if r is None else r


def prim_mul(x, y):
    r = _arith(x, y, mul_i32_ovf, mul_f64)
    return _err("TypeError: * on non-numbers") if r is None else r


def prim_div(x, y):
    r = _arith(x, y, div_i32_chk, div_f64)
    return _err("TypeError: / on non-numbers") if r is None else r


def prim_mod(x, y):
    r = _arith(x, y, mod_i32_chk, mod_f64)
    return _err("TypeError: % on non-numbers") if r is None else r


def prim_neg(x):
    if type(x) is int:
        r = sub_i32_ovf(0, x)
        return neg_f64(float(x)) if r is None else r
    if type(x) is float:
        return -x
    return _err("TypeError: unary - on non-number")


def _to_i32_operand(v):
    t = type(v)
    if t is int:
        return v
    if t is float:
        return f64_to_i32(v)
    return _err("TypeError: bitwise operator on non-number")


def _bitwise(op):
    def prim(x, y):
        a = _to_i32_operand(x)
        b = _to_i32_operand(y)
        return op(a, b)

    return prim


prim_and = _bitwise(and_i32)
prim_or = _bitwise(or_i32)
prim_xor = _bitwise(xor_i32)
prim_shl = _bitwise(shl_i32)
prim_shr = _bitwise(shr_i32)


def prim_lt(x, y) -> bool:
    if is_number(x) and is_number(y):
        return x < y
    return _err("TypeError: < on non-numbers")


def prim_le(x, y) -> bool:
    if is_number(x) and is_number(y):
        return x <= y
    return _err("TypeError: <= on non-numbers")


def prim_eq(x, y) -> bool:
    if is_number(x):
        if is_number(y):
            return float(x) == float(y)
        return False
    return eq_ref(x, y)


def prim_get(o, name: str):
    t = type(o)
    if t is JSObject:
        return obj_get(o, name)
    if name == "length":
        if t is JSArray:
            return arr_len(o)
        if t is str:
            return str_len(o)
    return _err(f"TypeError: cannot read property {name!r}")


def prim_put(o, name: str, v) -> None:
    if type(o) is JSObject:
        obj_put(o, name, v)
        return
    _err(f"TypeError: cannot set property {name!r}")


def prim_index_get(a, i):
    ta, ti = type(a), type(i)
    if ta is JSArray:
        if ti is int:
            return arr_get(a, i)
    elif ta is JSObject:
        if ti is str:
            return obj_get(a, i)
    elif ta is str:
        if ti is int:
            return str_char(a, i)
    return _err("TypeError: invalid indexing")


def prim_index_put(a, i, v) -> None:
    ta, ti = type(a), type(i)
    if ta is JSArray and ti is int:
        arr_put(a, i, v)
        return
    if ta is JSObject and ti is str:
        obj_put(a, i, v)
        return
    _err("TypeError: invalid indexed store")


BINARY_PRIMS = {
    "+": prim_add,
    "-": prim_sub,
    "*": prim_mul,
    "/": prim_div,
    "%": prim_mod,
    "&": prim_and,
    "|": prim_or,
    "^": prim_xor,
    "<<": prim_shl,
    ">>": prim_shr,
}
