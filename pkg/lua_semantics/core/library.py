"""
Library services reachable through ``$builtIn`` and the initial environment.

Every service is registered with a category that states what it may do
with the object store:

- ``PURE``: never touches theta (``type``, ``select``, ``math.*``, ...)
- ``READS``: looks tables up but never changes them (``next``, ``rawget``, ...)
- ``WRITES``: may change or allocate tables (``rawset``, ``setmetatable``, ...)

A service returns a *term*, not only a value: ``pcall`` answers with a
protected-mode call, ``print`` with a call to ``tostring`` on each argument,
``load`` with a call that binds ``_ENV``. Lua-level failures become
``$err`` terms; they are never Python exceptions outside this module.

The global functions are thin Lua wrappers ``function(...) return $builtIn
name(...) end`` so that rebinding a global never changes what another library
service does.
"""

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

from lua_semantics.core import delta as prim
from lua_semantics.core.dump import DumpError, dump_function, is_binary_chunk, undump_function
from lua_semantics.core.lexer import ParseError
from lua_semantics.core.parser import parse_chunk, parse_expression
from lua_semantics.core.store import ObjectStore, TableObject, ValueStore
from lua_semantics.core.terms import (
    EMPTY_TUPLE, FALSE, NIL, TRUE, VARARG, BinOp, BuiltIn, Call, EngineFault, ErrorValue,
    Expr, FunctionDef, Label, LabeledExpr, Name, Nil, Number, ObjRef, Paren, Return,
    SourcePos, String, Term, Tuple_, Value, fresh_function_label, type_name,
)
from lua_semantics.utils.logging_utils import get_logger

logger = get_logger("core.library")

PURE = "pure"
READS = "reads"
WRITES = "writes"

LUA_VERSION = b"Lua 5.2"
DEFAULT_LOAD_CHUNK_NAME = "=(load)"
LIBRARY_CHUNK_NAME = "=[library]"


class ServiceError(Exception):
    """Raised inside a service to produce a Lua error with ``message``."""

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class Host:
    """What library services need from the world outside the term: output and call sites."""

    def __init__(self, output: Optional[Callable[[bytes], None]] = None):
        """
        Initialize the host.

        Args:
            output: Sink for program output; collected in memory when None
        """
        self._chunks: List[bytes] = []
        self.output = output if output is not None else self._chunks.append
        self.call_sites: List = []

    def write(self, data: bytes) -> None:
        self.output(data)

    def getvalue(self) -> bytes:
        return b"".join(self._chunks)


class NullHost(Host):
    """Host that discards output; used when rules are only being tried."""

    def __init__(self):
        super().__init__(output=lambda data: None)


@dataclass(frozen=True)
class BuiltinService:
    name: str
    category: str
    impl: Callable[[List[Value], ObjectStore, Host], Term]


REGISTRY: Dict[str, BuiltinService] = {}


def service(name: str, category: str = PURE):
    """Register a library service under ``name``."""
    def decorator(fn):
        REGISTRY[name] = BuiltinService(name, category, fn)
        return fn
    return decorator


def call_service(name: str, args: List[Value], theta: ObjectStore, host: Optional[Host] = None) -> Term:
    """
    Run a library service.

    Args:
        name: Registered service name
        args: Flattened argument values
        theta: Object store; only WRITES services change it
        host: Output sink and call-site information

    Returns:
        The term the ``$builtIn`` call reduces to

    Raises:
        EngineFault: If no service has that name
    """
    entry = REGISTRY.get(name)
    if entry is None:
        raise EngineFault(f"unknown builtin service {name}")
    try:
        return entry.impl(args, theta, host if host is not None else NullHost())
    except ServiceError as e:
        return ErrorValue(String(e.message.encode("utf-8")))


# Argument helpers

def _arg(args: List[Value], i: int) -> Value:
    return args[i] if i < len(args) else NIL


def _type_of_arg(args: List[Value], i: int) -> str:
    return type_name(args[i]) if i < len(args) else "no value"


def _bad_argument(i: int, fname: str, extra: str) -> ServiceError:
    return ServiceError(f"bad argument #{i + 1} to '{fname}' ({extra})")


def check_any(args: List[Value], i: int, fname: str) -> Value:
    if i >= len(args):
        raise _bad_argument(i, fname, "value expected")
    return args[i]


def check_table(args: List[Value], i: int, fname: str) -> ObjRef:
    value = _arg(args, i)
    if not isinstance(value, ObjRef):
        raise _bad_argument(i, fname, f"table expected, got {_type_of_arg(args, i)}")
    return value


def check_number(args: List[Value], i: int, fname: str) -> float:
    number = prim.to_number(_arg(args, i))
    if number is None:
        raise _bad_argument(i, fname, f"number expected, got {_type_of_arg(args, i)}")
    return number


def opt_number(args: List[Value], i: int, fname: str, default: float) -> float:
    if isinstance(_arg(args, i), Nil):
        return default
    return check_number(args, i, fname)


def check_int(args: List[Value], i: int, fname: str) -> int:
    number = check_number(args, i, fname)
    if math.isnan(number) or math.isinf(number):
        return 0
    return int(number)


def opt_int(args: List[Value], i: int, fname: str, default: int) -> int:
    if isinstance(_arg(args, i), Nil):
        return default
    return check_int(args, i, fname)


def check_string(args: List[Value], i: int, fname: str) -> bytes:
    data = prim.to_concat_bytes(_arg(args, i))
    if data is None:
        raise _bad_argument(i, fname, f"string expected, got {_type_of_arg(args, i)}")
    return data


def opt_string(args: List[Value], i: int, fname: str, default: bytes) -> bytes:
    if isinstance(_arg(args, i), Nil):
        return default
    return check_string(args, i, fname)


def num(x: float) -> Number:
    return Number(float(x))


def string(data: bytes) -> String:
    return String(data)


def values(*items: Value) -> Expr:
    """A single value, or a tuple when there are zero or several."""
    if len(items) == 1:
        return items[0]
    return Tuple_(tuple(items))


def primordial(theta: ObjectStore, name: str) -> Value:
    value = theta.registry.get("primordial:" + name)
    if value is None:
        raise EngineFault(f"library function {name} is missing from the registry")
    return value


def where(pos: Optional[SourcePos]) -> str:
    """Position prefix for an error raised at ``pos``; library code has none."""
    if pos is None or pos.chunk == LIBRARY_CHUNK_NAME:
        return ""
    return pos.prefix()


def _check_table_key(key: Value) -> None:
    if isinstance(key, Nil):
        raise ServiceError("table index is nil")
    if isinstance(key, Number) and math.isnan(key.value):
        raise ServiceError("table index is NaN")


# Basic functions

@service("assert")
def _assert(args, theta, host):
    value = check_any(args, 0, "assert")
    if not (isinstance(value, Nil) or value == FALSE):
        return Tuple_(tuple(args))
    message = opt_string(args, 1, "assert", b"assertion failed!")
    return ErrorValue(String(message))


@service("error")
def _error(args, theta, host):
    value = _arg(args, 0)
    level = opt_int(args, 1, "error", 1)
    if isinstance(value, String) and level > 0:
        sites = host.call_sites
        if level - 1 < len(sites):
            value = String(where(sites[level - 1]).encode("utf-8") + value.value)
    return ErrorValue(value)


@service("getmetatable", READS)
def _getmetatable(args, theta, host):
    metatable = prim.metatable_of(check_any(args, 0, "getmetatable"), theta)
    if metatable is None:
        return NIL
    protected = theta.rawget(metatable, String(b"__metatable"))
    return protected if not isinstance(protected, Nil) else metatable


@service("setmetatable", WRITES)
def _setmetatable(args, theta, host):
    table = check_table(args, 0, "setmetatable")
    metatable = _arg(args, 1)
    if len(args) < 2 or not isinstance(metatable, (Nil, ObjRef)):
        raise _bad_argument(1, "setmetatable", "nil or table expected")
    current = theta.metatable_of(table)
    if current is not None and not isinstance(theta.rawget(current, String(b"__metatable")), Nil):
        raise ServiceError("cannot change a protected metatable")
    theta.set_metatable(table, metatable if isinstance(metatable, ObjRef) else None)
    return table


@service("ipairs", READS)
def _ipairs(args, theta, host):
    value = check_any(args, 0, "ipairs")
    handler = prim.indexmetatable(value, "__ipairs", theta)
    if not isinstance(handler, Nil):
        return Call(handler, (value,))
    check_table(args, 0, "ipairs")
    return Tuple_((primordial(theta, "inext"), value, num(0)))


@service("pairs", READS)
def _pairs(args, theta, host):
    value = check_any(args, 0, "pairs")
    handler = prim.indexmetatable(value, "__pairs", theta)
    if not isinstance(handler, Nil):
        return BuiltIn("$pairs", (Call(handler, (value,)),))
    if isinstance(value, ObjRef):
        return Tuple_((primordial(theta, "next"), value, NIL))
    # the message is assembled by ordinary reduction steps
    prefix = String(b"bad argument #1 to 'pairs' (table expected, got ")
    return BuiltIn("error", (BinOp("..", prefix, BinOp("..", BuiltIn("type", (value,)),
                                                        String(b")"))), num(0)))


@service("$pairs")
def _pairs_results(args, theta, host):
    # a __pairs handler supplies exactly the iterator, state and control value
    return Tuple_((_arg(args, 0), _arg(args, 1), _arg(args, 2)))


@service("next", READS)
def _next(args, theta, host):
    table = check_table(args, 0, "next")
    try:
        entry = theta.get(table).next_entry(_arg(args, 1))
    except KeyError:
        raise ServiceError("invalid key to 'next'")
    if entry is None:
        return NIL
    return Tuple_(entry)


@service("pcall")
def _pcall(args, theta, host):
    function = check_any(args, 0, "pcall")
    return LabeledExpr(Label.PROT_MD, Call(function, tuple(args[1:])))


@service("print")
def _print(args, theta, host):
    return BuiltIn("$print", tuple(BuiltIn("tostring", (a,)) for a in args))


@service("$print")
def _print_strings(args, theta, host):
    pieces = []
    for value in args:
        if not isinstance(value, String):
            raise ServiceError("'tostring' must return a string to 'print'")
        pieces.append(value.value)
    host.write(b"\t".join(pieces) + b"\n")
    return EMPTY_TUPLE


@service("rawequal")
def _rawequal(args, theta, host):
    check_any(args, 0, "rawequal")
    check_any(args, 1, "rawequal")
    return TRUE if prim.raw_equal(args[0], args[1]) else FALSE


@service("rawget", READS)
def _rawget(args, theta, host):
    table = check_table(args, 0, "rawget")
    return theta.rawget(table, check_any(args, 1, "rawget"))


@service("rawlen", READS)
def _rawlen(args, theta, host):
    value = _arg(args, 0)
    if isinstance(value, ObjRef):
        return num(theta.get(value).border())
    if isinstance(value, String):
        return num(len(value.value))
    raise _bad_argument(0, "rawlen", "table or string expected")


@service("rawset", WRITES)
def _rawset(args, theta, host):
    table = check_table(args, 0, "rawset")
    key = check_any(args, 1, "rawset")
    value = check_any(args, 2, "rawset")
    _check_table_key(key)
    theta.rawset(table, key, value)
    return table


@service("select")
def _select(args, theta, host):
    selector = _arg(args, 0)
    rest = args[1:]
    if isinstance(selector, String) and selector.value == b"#":
        return num(len(rest))
    n = check_int(args, 0, "select")
    top = len(rest) + 1
    if n < 0:
        n = top + n
    elif n > top:
        n = top
    if n < 1:
        raise _bad_argument(0, "select", "index out of range")
    return Tuple_(tuple(rest[n - 1:]))


@service("tonumber")
def _tonumber(args, theta, host):
    value = check_any(args, 0, "tonumber")
    if isinstance(_arg(args, 1), Nil):
        number = prim.to_number(value)
        return NIL if number is None else num(number)
    base = check_int(args, 1, "tonumber")
    data = check_string(args, 0, "tonumber").strip(b" \t\r\n\f\v").lower()
    if not 2 <= base <= 36:
        raise _bad_argument(1, "tonumber", "base out of range")
    negative = data.startswith(b"-")
    if negative:
        data = data[1:]
    if not data:
        return NIL
    total = 0
    for byte in data:
        ch = chr(byte)
        digit = int(ch) if ch.isdigit() else (ord(ch) - ord("a") + 10 if ch.isalpha() else 99)
        if digit >= base:
            return NIL
        total = total * base + digit
    return num(-total if negative else total)


@service("tostring", READS)
def _tostring(args, theta, host):
    value = check_any(args, 0, "tostring")
    handler = prim.indexmetatable(value, "__tostring", theta)
    if not isinstance(handler, Nil):
        return BuiltIn("$tostring", (Paren(Call(handler, (value,))),))
    return String(prim.tostring_primitive(value))


@service("$tostring")
def _tostring_result(args, theta, host):
    value = _arg(args, 0)
    if isinstance(value, String):
        return value
    if isinstance(value, Number):
        return String(prim.tostring_primitive(value))
    raise ServiceError("'__tostring' must return a string")


@service("type")
def _type(args, theta, host):
    return String(type_name(check_any(args, 0, "type")).encode("ascii"))


def _unpack(args, theta, fname):
    table = check_table(args, 0, fname)
    start = opt_int(args, 1, fname, 1)
    stop = opt_int(args, 2, fname, theta.get(table).border())
    if start > stop:
        return EMPTY_TUPLE
    if stop - start >= 1_000_000:
        raise ServiceError("too many results to unpack")
    entries = theta.get(table)
    return Tuple_(tuple(entries.rawget(num(i)) for i in range(start, stop + 1)))


@service("unpack", READS)
def _unpack_global(args, theta, host):
    return _unpack(args, theta, "unpack")


@service("load", READS)
def _load(args, theta, host):
    chunk = _arg(args, 0)
    if isinstance(chunk, FunctionDef):
        return Call(primordial(theta, "loadproducer"), tuple(args))
    if not isinstance(chunk, String):
        raise _bad_argument(0, "load", f"string expected, got {_type_of_arg(args, 0)}")
    chunk_name = DEFAULT_LOAD_CHUNK_NAME
    if isinstance(_arg(args, 1), String):
        chunk_name = args[1].value.decode("utf-8", "replace")  # type: ignore[union-attr]
    mode = opt_string(args, 2, "load", b"bt").decode("ascii", "replace")
    env = args[3] if len(args) > 3 else theta.registry["globals"]
    data = chunk.value
    try:
        if is_binary_chunk(data):
            if "b" not in mode:
                return _load_failure(f"attempt to load a binary chunk (mode is '{mode}')")
            function = undump_function(data, chunk_name)
        else:
            if "t" not in mode:
                return _load_failure(f"attempt to load a text chunk (mode is '{mode}')")
            body = parse_chunk(data, chunk_name)
            function = FunctionDef(fresh_function_label(), (), True, body, chunk_name)
    except (ParseError, DumpError) as e:
        logger.debug(f"load rejected chunk {chunk_name}: {e}")
        return _load_failure(str(e))
    binder = FunctionDef(fresh_function_label(), ("_ENV",), False, Return((function,)), "load")
    return Call(binder, (env,))


def _load_failure(message: str) -> Term:
    return Tuple_((NIL, String(message.encode("utf-8"))))


@service("$argcheck")
def _argcheck(args, theta, host):
    # $argcheck(value, expected type, argument number, function name)
    value, expected = _arg(args, 0), check_string(args, 1, "$argcheck").decode("ascii")
    if type_name(value) != expected:
        position = check_int(args, 2, "$argcheck")
        fname = check_string(args, 3, "$argcheck").decode("ascii")
        raise _bad_argument(position - 1, fname, f"{expected} expected, got {type_name(value)}")
    return EMPTY_TUPLE


# math

def _math1(name: str, fn: Callable[[float], float]):
    @service("math." + name)
    def impl(args, theta, host):
        return num(fn(check_number(args, 0, name)))
    return impl


def _safe(fn: Callable[[float], float], fallback: Callable[[float], float]) -> Callable[[float], float]:
    def wrapped(x: float) -> float:
        try:
            return fn(x)
        except (ValueError, OverflowError):
            return fallback(x)
    return wrapped


_math1("abs", abs)
_math1("ceil", prim.ceil)
_math1("floor", prim.floor)
_math1("sqrt", _safe(math.sqrt, lambda x: math.nan))
_math1("exp", _safe(math.exp, lambda x: math.inf))


@service("math.fmod")
def _math_fmod(args, theta, host):
    return num(prim.fmod(check_number(args, 0, "fmod"), check_number(args, 1, "fmod")))


@service("math.modf")
def _math_modf(args, theta, host):
    x = check_number(args, 0, "modf")
    if math.isinf(x):
        return Tuple_((num(x), num(0.0)))
    fraction, integral = math.modf(x)
    return Tuple_((num(integral), num(fraction)))


def _log(x: float) -> float:
    if math.isnan(x):
        return x
    if x < 0:
        return math.nan
    if x == 0:
        return -math.inf
    if math.isinf(x):
        return x
    return math.log(x)


@service("math.log")
def _math_log(args, theta, host):
    x = check_number(args, 0, "log")
    if isinstance(_arg(args, 1), Nil):
        return num(_log(x))
    base = check_number(args, 1, "log")
    if base == 10.0:
        return num(_log(x) / math.log(10.0) if x > 0 and not math.isinf(x) else _log(x))
    return num(prim.divide(_log(x), _log(base)))


def _extremum(name: str, better: Callable[[float, float], bool]):
    @service("math." + name)
    def impl(args, theta, host):
        best = check_number(args, 0, name)
        for i in range(1, len(args)):
            candidate = check_number(args, i, name)
            if better(candidate, best):
                best = candidate
        return num(best)
    return impl


_extremum("max", lambda a, b: a > b)
_extremum("min", lambda a, b: a < b)


# string

def _posrelat(pos: int, length: int) -> int:
    if pos >= 0:
        return pos
    if -pos > length:
        return 0
    return length + pos + 1


@service("string.len")
def _string_len(args, theta, host):
    return num(len(check_string(args, 0, "len")))


@service("string.sub")
def _string_sub(args, theta, host):
    data = check_string(args, 0, "sub")
    length = len(data)
    start = _posrelat(opt_int(args, 1, "sub", 1), length)
    stop = _posrelat(opt_int(args, 2, "sub", -1), length)
    start = max(start, 1)
    stop = min(stop, length)
    return String(data[start - 1:stop] if start <= stop else b"")


@service("string.rep")
def _string_rep(args, theta, host):
    data = check_string(args, 0, "rep")
    count = check_int(args, 1, "rep")
    separator = opt_string(args, 2, "rep", b"")
    if count <= 0:
        return String(b"")
    if (len(data) + len(separator)) * count > 100_000_000:
        raise ServiceError("resulting string too large")
    return String(separator.join([data] * count))


@service("string.upper")
def _string_upper(args, theta, host):
    return String(check_string(args, 0, "upper").upper())


@service("string.lower")
def _string_lower(args, theta, host):
    return String(check_string(args, 0, "lower").lower())


@service("string.reverse")
def _string_reverse(args, theta, host):
    return String(check_string(args, 0, "reverse")[::-1])


@service("string.byte")
def _string_byte(args, theta, host):
    data = check_string(args, 0, "byte")
    length = len(data)
    start = _posrelat(opt_int(args, 1, "byte", 1), length)
    stop = _posrelat(opt_int(args, 2, "byte", start), length)
    start = max(start, 1)
    stop = min(stop, length)
    if start > stop:
        return EMPTY_TUPLE
    return values(*(num(b) for b in data[start - 1:stop]))


@service("string.char")
def _string_char(args, theta, host):
    out = bytearray()
    for i in range(len(args)):
        code = check_int(args, i, "char")
        if not 0 <= code <= 255:
            raise _bad_argument(i, "char", "value out of range")
        out.append(code)
    return String(bytes(out))


@service("string.dump")
def _string_dump(args, theta, host):
    function = _arg(args, 0)
    if not isinstance(function, FunctionDef):
        raise _bad_argument(0, "dump", f"function expected, got {_type_of_arg(args, 0)}")
    try:
        return String(dump_function(function))
    except DumpError as e:
        raise ServiceError(str(e))


# table

@service("table.insert", WRITES)
def _table_insert(args, theta, host):
    table = check_table(args, 0, "insert")
    size = theta.get(table).border()
    if len(args) == 2:
        position, value = size + 1, args[1]
    elif len(args) == 3:
        position = check_int(args, 1, "insert")
        if position < 1 or position > size + 1:
            raise _bad_argument(1, "insert", "position out of bounds")
        value = args[2]
        for i in range(size, position - 1, -1):
            theta.rawset(table, num(i + 1), theta.rawget(table, num(i)))
    else:
        raise ServiceError("wrong number of arguments to 'insert'")
    theta.rawset(table, num(position), value)
    return EMPTY_TUPLE


@service("table.remove", WRITES)
def _table_remove(args, theta, host):
    table = check_table(args, 0, "remove")
    size = theta.get(table).border()
    position = opt_int(args, 1, "remove", size)
    if len(args) > 1 and position != size and (position < 1 or position > size + 1):
        raise _bad_argument(0, "remove", "position out of bounds")
    result = theta.rawget(table, num(position))
    while position < size:
        theta.rawset(table, num(position), theta.rawget(table, num(position + 1)))
        position += 1
    theta.rawset(table, num(position), NIL)
    return result


@service("table.concat", READS)
def _table_concat(args, theta, host):
    table = check_table(args, 0, "concat")
    separator = opt_string(args, 1, "concat", b"")
    start = opt_int(args, 2, "concat", 1)
    stop = opt_int(args, 3, "concat", theta.get(table).border())
    pieces = []
    for i in range(start, stop + 1):
        piece = prim.to_concat_bytes(theta.rawget(table, num(i)))
        if piece is None:
            raise ServiceError(f"invalid value (at index {i}) in table for 'concat'")
        pieces.append(piece)
    return String(separator.join(pieces))


@service("table.unpack", READS)
def _table_unpack(args, theta, host):
    return _unpack(args, theta, "unpack")


@service("table.pack", WRITES)
def _table_pack(args, theta, host):
    table = TableObject()
    for i, value in enumerate(args, start=1):
        table.rawset(num(i), value)
    table.rawset(String(b"n"), num(len(args)))
    return theta.alloc(table)


# Library code written in the language itself

LIBRARY_SOURCES = {
    "inext": """
        function (t, i)
          i = i + 1
          local v = $builtIn rawget(t, i)
          if v == nil then return nil end
          return i, v
        end
    """,
    "loadproducer": """
        function (producer, ...)
          local acc = ""
          local piece = producer()
          while piece ~= nil and piece ~= "" do
            if $builtIn type(piece) ~= "string" then
              return nil, "reader function must return a string"
            end
            acc = acc .. piece
            piece = producer()
          end
          return $builtIn load(acc, ...)
        end
    """,
    "sort": """
        function (list, comp)
          $builtIn $argcheck(list, "table", 1, "sort")
          local n = $builtIn rawlen(list)
          local i = 2
          while i <= n do
            local v = $builtIn rawget(list, i)
            local j = i - 1
            local moving = true
            while moving and j >= 1 do
              local w = $builtIn rawget(list, j)
              local less
              if comp then less = comp(v, w) else less = v < w end
              if less then
                $builtIn rawset(list, j + 1, w)
                j = j - 1
              else
                moving = false
              end
            end
            $builtIn rawset(list, j + 1, v)
            i = i + 1
          end
        end
    """,
}

_library_functions: Dict[str, FunctionDef] = {}


def library_function(name: str) -> FunctionDef:
    """Parse (once per process) a library function written in Lua."""
    function = _library_functions.get(name)
    if function is None:
        parsed = parse_expression(LIBRARY_SOURCES[name], LIBRARY_CHUNK_NAME, allow_runtime_syntax=True)
        if not isinstance(parsed, FunctionDef):
            raise EngineFault(f"library source {name} is not a function")
        function = FunctionDef(parsed.label, parsed.params, parsed.is_vararg, parsed.body, name)
        _library_functions[name] = function
    return function


def wrapper(name: str) -> FunctionDef:
    """``function(...) return $builtIn name(...) end``."""
    short = name.rsplit(".", 1)[-1]
    return FunctionDef(fresh_function_label(), (), True, Return((BuiltIn(name, (VARARG,)),)), short)


def next_wrapper() -> FunctionDef:
    return FunctionDef(fresh_function_label(), ("table", "index"), False,
                       Return((BuiltIn("next", (Name("table"), Name("index"))),)), "next")


BASIC_FUNCTIONS = (
    "assert", "error", "getmetatable", "ipairs", "load", "pairs", "pcall", "print",
    "rawequal", "rawget", "rawlen", "rawset", "select", "setmetatable", "tonumber",
    "tostring", "type", "unpack",
)
LIBRARY_TABLES = {
    "math": ("abs", "ceil", "exp", "floor", "fmod", "log", "max", "min", "modf", "sqrt"),
    "string": ("byte", "char", "dump", "len", "lower", "rep", "reverse", "sub", "upper"),
    "table": ("concat", "insert", "pack", "remove", "unpack"),
}


def bootstrap_env(sigma: ValueStore, theta: ObjectStore):
    """
    Build the initial global environment.

    Args:
        sigma: Value store that receives the ``_ENV`` reference
        theta: Object store that receives the global and library tables

    Returns:
        ``(sigma, theta, env_ref)``: the stores and the reference bound to ``_ENV``
    """
    globals_ref = theta.alloc()
    theta.registry["globals"] = globals_ref

    def define(table: ObjRef, key: str, value: Value) -> None:
        theta.rawset(table, String(key.encode("ascii")), value)

    for name in BASIC_FUNCTIONS:
        define(globals_ref, name, wrapper(name))
    next_function = next_wrapper()
    define(globals_ref, "next", next_function)
    define(globals_ref, "_G", globals_ref)
    define(globals_ref, "_VERSION", String(LUA_VERSION))

    libraries: Dict[str, ObjRef] = {}
    for library, members in LIBRARY_TABLES.items():
        table = theta.alloc()
        for member in members:
            define(table, member, wrapper(f"{library}.{member}"))
        define(globals_ref, library, table)
        libraries[library] = table
    define(libraries["math"], "pi", num(math.pi))
    define(libraries["math"], "huge", num(math.inf))
    define(libraries["table"], "sort", library_function("sort"))

    string_metatable = theta.alloc()
    define(string_metatable, "__index", libraries["string"])
    theta.registry["metatable:string"] = string_metatable

    theta.registry["primordial:next"] = next_function
    theta.registry["primordial:inext"] = library_function("inext")
    theta.registry["primordial:loadproducer"] = library_function("loadproducer")

    env_ref = sigma.alloc(globals_ref, hint="_ENV")
    logger.debug(f"Bootstrapped environment with {len(theta)} tables")
    return sigma, theta, env_ref


def _ensure_registered() -> None:
    for name in BASIC_FUNCTIONS + ("next",):
        if name not in REGISTRY:
            raise EngineFault(f"basic function {name} has no service")
    for library, members in LIBRARY_TABLES.items():
        for member in members:
            if f"{library}.{member}" not in REGISTRY:
                raise EngineFault(f"library function {library}.{member} has no service")


_ensure_registered()
