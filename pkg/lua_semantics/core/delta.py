"""
Primitive operators and metatable lookups (the non-library part of delta).

Arithmetic follows IEEE doubles with the C library's behaviour for the
corner cases (division by zero, ``fmod``, ``pow`` overflow), because that is
what a reference Lua 5.2 built on doubles prints.
"""

import math
from typing import Optional

from lua_semantics.core.lexer import str_to_number
from lua_semantics.core.terms import (
    FALSE, NIL, TRUE, Boolean, EngineFault, FunctionDef, Label, Nil, Number, ObjRef,
    String, Term, Value, type_name,
)

BINARY_EVENTS = {
    "+": "__add", "-": "__sub", "*": "__mul", "/": "__div", "%": "__mod", "^": "__pow",
    "..": "__concat", "<": "__lt", "<=": "__le", "==": "__eq",
}
ARITH_OPERATORS = frozenset({"+", "-", "*", "/", "%", "^"})
COMPARISON_OPERATORS = frozenset({"<", "<=", ">", ">="})

# the default NaN produced by 0/0 on x86 carries the sign bit
_DEFAULT_NAN = math.copysign(math.nan, -1.0)


def number_format(x: float) -> bytes:
    """Render a number the way ``tostring`` does (``%.14g``)."""
    if math.isnan(x):
        return b"-nan" if math.copysign(1.0, x) < 0 else b"nan"
    return ("%.14g" % x).encode("ascii")


def tostring_primitive(value: Value) -> bytes:
    """String conversion without consulting ``__tostring``."""
    if isinstance(value, Nil):
        return b"nil"
    if isinstance(value, Boolean):
        return b"true" if value.value else b"false"
    if isinstance(value, Number):
        return number_format(value.value)
    if isinstance(value, String):
        return value.value
    if isinstance(value, ObjRef):
        return b"table: 0x%08x" % value.id
    if isinstance(value, FunctionDef):
        return b"function: 0x%08x" % value.label
    raise EngineFault(f"not a value: {value!r}")


def to_number(value: Value) -> Optional[float]:
    """Number coercion for arithmetic: numbers, and strings that read as numerals."""
    if isinstance(value, Number):
        return value.value
    if isinstance(value, String):
        return str_to_number(value.value)
    return None


def to_concat_bytes(value: Value) -> Optional[bytes]:
    if isinstance(value, String):
        return value.value
    if isinstance(value, Number):
        return number_format(value.value)
    return None


def divide(a: float, b: float) -> float:
    if b == 0.0:
        if a == 0.0 or math.isnan(a):
            return _DEFAULT_NAN
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


def floor(x: float) -> float:
    if math.isinf(x) or math.isnan(x):
        return x
    return float(math.floor(x))


def ceil(x: float) -> float:
    if math.isinf(x) or math.isnan(x):
        return x
    return float(math.ceil(x))


def power(a: float, b: float) -> float:
    try:
        return math.pow(a, b)
    except ValueError:
        return math.nan
    except OverflowError:
        if a < 0 and b == math.floor(b) and int(b) % 2 == 1:
            return -math.inf
        return math.inf


def fmod(a: float, b: float) -> float:
    try:
        return math.fmod(a, b)
    except ValueError:
        return math.nan


def arith(op: str, a: float, b: float) -> float:
    """Apply a binary arithmetic operator to two numbers."""
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return divide(a, b)
    if op == "%":
        return a - floor(divide(a, b)) * b
    if op == "^":
        return power(a, b)
    raise EngineFault(f"unknown arithmetic operator {op}")


def less_than(a: Value, b: Value) -> Optional[bool]:
    """Primitive ``<`` on two numbers or two strings; None otherwise."""
    if isinstance(a, Number) and isinstance(b, Number):
        return a.value < b.value
    if isinstance(a, String) and isinstance(b, String):
        return a.value < b.value
    return None


def less_equal(a: Value, b: Value) -> Optional[bool]:
    if isinstance(a, Number) and isinstance(b, Number):
        return a.value <= b.value
    if isinstance(a, String) and isinstance(b, String):
        return a.value <= b.value
    return None


def raw_equal(a: Value, b: Value) -> bool:
    """Primitive equality: numbers by value, tables by reference, functions by definition."""
    if isinstance(a, Number) and isinstance(b, Number):
        return a.value == b.value
    return a == b


def apply_operator(op: str, *values: Value) -> Optional[Value]:
    """
    Primitive meaning of an operator applied to values.

    Args:
        op: Operator symbol (``+``, ``..``, ``==``, ``not``, unary ``-`` is ``neg``, ...)
        values: Operand values

    Returns:
        The resulting value, or None when the operands are of the wrong kind
        and a metatable fallback is needed
    """
    if op in ARITH_OPERATORS:
        a, b = to_number(values[0]), to_number(values[1])
        if a is None or b is None:
            return None
        return Number(arith(op, a, b))
    if op == "..":
        a_bytes, b_bytes = to_concat_bytes(values[0]), to_concat_bytes(values[1])
        if a_bytes is None or b_bytes is None:
            return None
        return String(a_bytes + b_bytes)
    if op == "==":
        return TRUE if raw_equal(values[0], values[1]) else FALSE
    if op in ("<", ">"):
        left, right = values if op == "<" else (values[1], values[0])
        result = less_than(left, right)
        return None if result is None else (TRUE if result else FALSE)
    if op in ("<=", ">="):
        left, right = values if op == "<=" else (values[1], values[0])
        result = less_equal(left, right)
        return None if result is None else (TRUE if result else FALSE)
    if op == "not":
        return FALSE if _truthy(values[0]) else TRUE
    if op == "neg":
        number = to_number(values[0])
        return None if number is None else Number(-number)
    if op == "#":
        if isinstance(values[0], String):
            return Number(float(len(values[0].value)))
        return None
    raise EngineFault(f"unknown operator {op}")


def _truthy(value: Value) -> bool:
    return not (isinstance(value, Nil) or value == FALSE)


def binopeventkey(op: str) -> str:
    """Metatable key of the event a binary operator raises.

    Raises:
        EngineFault: For operators without an event (``and``, ``or``, ``>``, ``>=``)
    """
    try:
        return BINARY_EVENTS[op]
    except KeyError:
        raise EngineFault(f"operator {op} has no metatable event") from None


# Metatables

def metatable_of(value: Value, theta) -> Optional[ObjRef]:
    """Metatable of any value: per-table for tables, per-type otherwise."""
    if isinstance(value, ObjRef):
        return theta.metatable_of(value)
    registered = theta.registry.get("metatable:" + type_name(value))
    return registered if isinstance(registered, ObjRef) else None


def indexmetatable(value: Value, key: str, theta) -> Value:
    """Entry ``key`` of the metatable of ``value``, or nil."""
    metatable = metatable_of(value, theta)
    if metatable is None:
        return NIL
    return theta.rawget(metatable, String(key.encode("ascii")))


def getbinhandler(left: Value, right: Value, event: str, theta) -> Value:
    """Handler for a binary event: the left operand's, else the right operand's."""
    handler = indexmetatable(left, event, theta)
    if isinstance(handler, Nil):
        handler = indexmetatable(right, event, theta)
    return handler


def getequalhandler(left: Value, right: Value, theta) -> Value:
    """``__eq`` handler, used only when both operands carry the same one."""
    first = indexmetatable(left, "__eq", theta)
    if isinstance(first, Nil):
        return NIL
    second = indexmetatable(right, "__eq", theta)
    return first if raw_equal(first, second) else NIL


def errmessage(label: Label, *type_names: str) -> str:
    """Message for a failed operation whose fallback found no handler."""
    if label in (Label.ARITH_WO, Label.NEG_WO):
        return f"attempt to perform arithmetic on a {type_names[0]} value"
    if label is Label.CONCAT_WO:
        return f"attempt to concatenate a {type_names[0]} value"
    if label is Label.LEN_WO:
        return f"attempt to get length of a {type_names[0]} value"
    if label in (Label.INDEX, Label.NEW_INDEX):
        return f"attempt to index a {type_names[0]} value"
    if label is Label.WFUN_CALL:
        return f"attempt to call a {type_names[0]} value"
    if label is Label.ORD_WO:
        first, second = type_names
        if first == second:
            return f"attempt to compare two {first} values"
        return f"attempt to compare {first} with {second}"
    raise EngineFault(f"no error message for label {label.value}")


def delta(op: str, *values: Value, theta=None, host=None) -> Term:
    """
    The interpretation function: primitive operators and library services.

    Operators are looked up first; any other name is a library service from
    the builtin registry, which may consult or update ``theta``.
    """
    if op in ARITH_OPERATORS or op in ("..", "==", "<", "<=", ">", ">=", "not", "neg", "#"):
        result = apply_operator(op, *values)
        if result is None:
            raise EngineFault(f"operator {op} is undefined on {[type_name(v) for v in values]}")
        return result
    from lua_semantics.core.library import call_service
    return call_service(op, list(values), theta, host)
