"""
Binary chunk codec behind ``string.dump`` and binary ``load``.

A dumped function is a signature followed by the function's source text.
Only functions whose free variables are nothing but ``_ENV`` can be dumped;
on load, ``_ENV`` is rebound to the environment given to ``load``.
"""

from lua_semantics.core.lexer import ParseError
from lua_semantics.core.parser import parse_expression
from lua_semantics.core.pretty import render_source
from lua_semantics.core.terms import (
    FunctionDef, LuaSemanticsError, Name, ObjRef, Ref, Term, Tuple_, display_chunk_name, map_children,
)

SIGNATURE = b"\x1bLua"
VERSION = b"\x52"
FORMAT = b"\x00"
HEADER = SIGNATURE + VERSION + FORMAT


class DumpError(LuaSemanticsError):
    """Exception raised when a function cannot be dumped or a binary chunk is malformed."""
    pass


def _unbind_environment(term: Term) -> Term:
    if isinstance(term, Ref):
        if term.hint == "_ENV":
            return Name("_ENV")
        raise DumpError("unable to dump given function")
    if isinstance(term, (ObjRef, Tuple_)):
        raise DumpError("unable to dump given function")
    return map_children(term, _unbind_environment)


def dump_function(function: FunctionDef) -> bytes:
    """
    Serialize a function literal.

    Raises:
        DumpError: If the function captured anything but the global environment
    """
    unbound = map_children(function, _unbind_environment)
    return HEADER + render_source(unbound).encode("utf-8")


def is_binary_chunk(data: bytes) -> bool:
    return data[:1] == SIGNATURE[:1]


def undump_function(data: bytes, chunk_name: str) -> FunctionDef:
    """
    Read back a dumped function; the result carries a fresh FunctionLabel.

    Raises:
        DumpError: If the header or the payload is not a dumped function
    """
    if not data.startswith(HEADER):
        raise DumpError(f"{display_chunk_name(chunk_name)}: bad binary format (not a dumped function)")
    try:
        function = parse_expression(data[len(HEADER):], chunk_name, allow_runtime_syntax=True)
    except ParseError as e:
        raise DumpError(f"{display_chunk_name(chunk_name)}: bad binary format ({e.message})") from e
    if not isinstance(function, FunctionDef):
        raise DumpError(f"{display_chunk_name(chunk_name)}: bad binary format (not a function)")
    return function
