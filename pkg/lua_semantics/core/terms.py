"""
Term language for the Lua 5.2 reduction semantics.

Source statements and expressions of the formalized subset share one tree
with the run-time constructs (references, labels, tuples, ``$iter``,
``$builtIn``, ``$err``) that only appear while a program executes. Terms are
frozen dataclasses: they are never mutated after construction, so they can
be shared freely between configurations and threads.
"""

import itertools
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Callable, Dict, FrozenSet, Iterator, List, Mapping, Optional, Set, Tuple


class LuaSemanticsError(Exception):
    """Base exception for host-level failures of the engine."""
    pass


class EngineFault(LuaSemanticsError):
    """Exception raised when the engine reaches a state it should never reach."""
    pass


class StuckFault(EngineFault):
    """Exception raised when a redex matches no reduction rule."""
    pass


class Label(Enum):
    """Labels carried by labeled statements and expressions."""

    BREAK = "Break"
    RETURN = "Return"
    PROT_MD = "ProtMd"
    ARITH_WO = "ArithWO"
    CONCAT_WO = "ConcatWO"
    ORD_WO = "OrdWO"
    NEG_WO = "NegWO"
    LEN_WO = "LenWO"
    EQ_FAIL = "EqFail"
    INDEX = "Index"
    NEW_INDEX = "NewIndex"
    WFUN_CALL = "WFunCall"

    @property
    def is_control(self) -> bool:
        return self in CONTROL_LABELS


CONTROL_LABELS: FrozenSet[Label] = frozenset({Label.BREAK, Label.RETURN, Label.PROT_MD})
FALLBACK_LABELS: FrozenSet[Label] = frozenset(set(Label) - CONTROL_LABELS)


@dataclass(frozen=True)
class SourcePos:
    """Chunk name and line of the source construct a node came from."""
    chunk: str
    line: int

    def prefix(self) -> str:
        return f"{display_chunk_name(self.chunk)}:{self.line}: "


def display_chunk_name(chunk: str) -> str:
    """Chunk name as shown in messages: ``=name`` and ``@file`` verbatim, else ``[string "..."]``."""
    if chunk[:1] in ("=", "@"):
        return chunk[1:]
    first_line, newline, _ = chunk.partition("\n")
    if len(first_line) < 45 and not newline:
        return f'[string "{first_line}"]'
    return f'[string "{first_line[:45]}..."]'


_labels = itertools.count(1)


def fresh_function_label() -> int:
    """Return a FunctionLabel never handed out before in this process."""
    return next(_labels)


class Term:
    """Base class of every node of the term language."""
    __slots__ = ()


class Expr(Term):
    """Expression forms."""
    __slots__ = ()


class Stmt(Term):
    """Statement forms."""
    __slots__ = ()


class Value(Expr):
    """Values: nil, booleans, numbers, strings, function literals, object references."""
    __slots__ = ()


# Values

@dataclass(frozen=True)
class Nil(Value):
    pass


@dataclass(frozen=True)
class Boolean(Value):
    value: bool


@dataclass(frozen=True)
class Number(Value):
    value: float

    def __post_init__(self):
        if type(self.value) is not float:
            object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class String(Value):
    value: bytes

    def __post_init__(self):
        if isinstance(self.value, str):
            object.__setattr__(self, "value", self.value.encode("utf-8"))


@dataclass(frozen=True)
class FunctionDef(Value):
    """Function literal; ``label`` identifies the definition occurrence."""
    label: int
    params: Tuple[str, ...]
    is_vararg: bool
    body: Stmt
    name: str = field(default="", compare=False, repr=False)


@dataclass(frozen=True)
class ObjRef(Value):
    """Reference into the object store (theta)."""
    id: int


NIL = Nil()
TRUE = Boolean(True)
FALSE = Boolean(False)


# Expressions

@dataclass(frozen=True)
class Name(Expr):
    name: str


@dataclass(frozen=True)
class Ref(Expr):
    """Reference into the value store (sigma); ``hint`` is the variable it was allocated for."""
    id: int
    hint: str = field(default="", compare=False, repr=False)


@dataclass(frozen=True)
class Vararg(Expr):
    pass


@dataclass(frozen=True)
class Index(Expr):
    obj: Expr
    key: Expr
    pos: Optional[SourcePos] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Paren(Expr):
    expr: Expr


@dataclass(frozen=True)
class TableCons(Expr):
    """Table constructor; ``keys[i]`` is None for positional fields."""
    keys: Tuple[Optional[Expr], ...]
    values: Tuple[Expr, ...]
    pos: Optional[SourcePos] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Call(Expr):
    fn: Expr
    args: Tuple[Expr, ...]
    pos: Optional[SourcePos] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class MethodCall(Expr):
    obj: Expr
    method: str
    args: Tuple[Expr, ...]
    pos: Optional[SourcePos] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    pos: Optional[SourcePos] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class UnOp(Expr):
    op: str
    operand: Expr
    pos: Optional[SourcePos] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Tuple_(Expr):
    """Run-time multi-value carrier ``<e, ...>``."""
    items: Tuple[Expr, ...]


@dataclass(frozen=True)
class BuiltIn(Expr):
    """``$builtIn name(args)``: direct, early-bound call into delta."""
    name: str
    args: Tuple[Expr, ...]
    pos: Optional[SourcePos] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class LabeledExpr(Expr):
    """Labeled expression; the body is a statement for Return-labeled call frames."""
    label: Label
    body: Term
    pos: Optional[SourcePos] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ErrorValue(Expr):
    """``$err v``: an error object in flight."""
    value: Value


# Statements

@dataclass(frozen=True)
class Skip(Stmt):
    pass


@dataclass(frozen=True)
class If(Stmt):
    cond: Expr
    then: Stmt
    orelse: Stmt


@dataclass(frozen=True)
class While(Stmt):
    cond: Expr
    body: Stmt


@dataclass(frozen=True)
class Iter(Stmt):
    """``$iter e do s end``: a while loop already wrapped by its Break label."""
    cond: Expr
    body: Stmt


@dataclass(frozen=True)
class Break(Stmt):
    pass


@dataclass(frozen=True)
class Seq(Stmt):
    first: Stmt
    rest: Stmt


@dataclass(frozen=True)
class Local(Stmt):
    """``local x, ... = e, ... in s end``."""
    names: Tuple[str, ...]
    exprs: Tuple[Expr, ...]
    body: Stmt


@dataclass(frozen=True)
class Assign(Stmt):
    targets: Tuple[Expr, ...]
    exprs: Tuple[Expr, ...]


@dataclass(frozen=True)
class CallStat(Stmt):
    """A call (or any expression produced while reducing one) in statement position."""
    call: Expr


@dataclass(frozen=True)
class Return(Stmt):
    exprs: Tuple[Expr, ...]


@dataclass(frozen=True)
class LabeledStmt(Stmt):
    label: Label
    body: Stmt
    pos: Optional[SourcePos] = field(default=None, compare=False, repr=False)


SKIP = Skip()
BREAK = Break()
VARARG = Vararg()
EMPTY_TUPLE = Tuple_(())


# Generic traversal

_CHILD_FIELDS: Dict[type, Tuple[Tuple[str, str], ...]] = {}


def child_fields(cls: type) -> Tuple[Tuple[str, str], ...]:
    """Return ``(attribute, kind)`` pairs for the term-valued fields of ``cls``.

    ``kind`` is ``"one"`` for a single child and ``"many"`` for a tuple of
    children (which may contain None, as in table constructor keys).
    """
    cached = _CHILD_FIELDS.get(cls)
    if cached is not None:
        return cached
    result = []
    for f in fields(cls):
        if f.name in ("pos", "label", "name", "hint", "op", "method", "params",
                      "is_vararg", "names", "value", "id"):
            # value of ErrorValue is a term; value of literals is not
            if not (cls is ErrorValue and f.name == "value"):
                continue
        if f.name in ("items", "args", "exprs", "targets", "keys", "values"):
            result.append((f.name, "many"))
        else:
            result.append((f.name, "one"))
    cached = tuple(result)
    _CHILD_FIELDS[cls] = cached
    return cached


def rebuild(node: Term, attr: str, value) -> Term:
    """Return a shallow copy of ``node`` with ``attr`` replaced."""
    new = object.__new__(type(node))
    new.__dict__.update(node.__dict__)
    object.__setattr__(new, attr, value)
    return new


def iter_children(node: Term) -> Iterator[Term]:
    for attr, kind in child_fields(type(node)):
        child = getattr(node, attr)
        if kind == "one":
            yield child
        else:
            for item in child:
                if item is not None:
                    yield item


def map_children(node: Term, fn: Callable[[Term], Term]) -> Term:
    """Apply ``fn`` to every direct child, sharing the node when nothing changes."""
    result = node
    for attr, kind in child_fields(type(node)):
        child = getattr(node, attr)
        if kind == "one":
            new_child = fn(child)
            if new_child is not child:
                result = rebuild(result, attr, new_child)
        else:
            new_items = tuple(None if item is None else fn(item) for item in child)
            if any(a is not b for a, b in zip(new_items, child)):
                result = rebuild(result, attr, new_items)
    return result


# Substitution

VARARG_NAME = "..."

_LEAVES = (Nil, Boolean, Number, String, ObjRef, Ref, Skip, Break)


def substitute(term: Term, bindings: Mapping[str, Term]) -> Term:
    """Replace free occurrences of the mapped names (``...`` included)."""
    if not bindings:
        return term
    return _subst(term, bindings)


def _subst(term: Term, bindings: Mapping[str, Term]) -> Term:
    if isinstance(term, _LEAVES):
        return term
    if isinstance(term, Name):
        return bindings.get(term.name, term)
    if isinstance(term, Vararg):
        return bindings.get(VARARG_NAME, term)
    if isinstance(term, Seq):
        # sequences are right-nested; walk the spine without recursing
        spine = []
        node: Term = term
        while isinstance(node, Seq):
            spine.append(node)
            node = node.rest
        tail = _subst(node, bindings)
        for seq in reversed(spine):
            first = _subst(seq.first, bindings)
            if first is seq.first and tail is seq.rest:
                tail = seq
            else:
                tail = Seq(first, tail)
        return tail
    if isinstance(term, Local):
        exprs = tuple(_subst(e, bindings) for e in term.exprs)
        inner = _without(bindings, term.names)
        body = _subst(term.body, inner) if inner else term.body
        return Local(term.names, exprs, body)
    if isinstance(term, FunctionDef):
        hidden = term.params + ((VARARG_NAME,) if term.is_vararg else ())
        inner = _without(bindings, hidden)
        if not inner:
            return term
        body = _subst(term.body, inner)
        if body is term.body:
            return term
        return FunctionDef(term.label, term.params, term.is_vararg, body, term.name)
    return map_children(term, lambda child: _subst(child, bindings))


def _without(bindings: Mapping[str, Term], names) -> Mapping[str, Term]:
    if not any(n in bindings for n in names):
        return bindings
    return {k: v for k, v in bindings.items() if k not in names}


def free_names(term: Term) -> Set[str]:
    """Names (and ``...``) with at least one unbound occurrence in ``term``."""
    result: Set[str] = set()
    _collect_free(term, frozenset(), result)
    return result


def _collect_free(term: Term, bound: FrozenSet[str], out: Set[str]) -> None:
    while True:
        if isinstance(term, _LEAVES):
            return
        if isinstance(term, Name):
            if term.name not in bound:
                out.add(term.name)
            return
        if isinstance(term, Vararg):
            if VARARG_NAME not in bound:
                out.add(VARARG_NAME)
            return
        if isinstance(term, Seq):
            _collect_free(term.first, bound, out)
            term = term.rest
            continue
        if isinstance(term, Local):
            for e in term.exprs:
                _collect_free(e, bound, out)
            bound = bound | frozenset(term.names)
            term = term.body
            continue
        if isinstance(term, FunctionDef):
            hidden = term.params + ((VARARG_NAME,) if term.is_vararg else ())
            bound = bound | frozenset(hidden)
            term = term.body
            continue
        for child in iter_children(term):
            _collect_free(child, bound, out)
        return


def relabel(term: Term) -> Term:
    """Rename FunctionLabels to 1, 2, ... in traversal order (for structural comparison)."""
    counter = itertools.count(1)
    mapping: Dict[int, int] = {}

    def walk(node: Term) -> Term:
        if isinstance(node, FunctionDef):
            if node.label not in mapping:
                mapping[node.label] = next(counter)
            return FunctionDef(mapping[node.label], node.params, node.is_vararg,
                               walk(node.body), node.name)
        if isinstance(node, _LEAVES):
            return node
        return map_children(node, walk)

    return walk(term)


# Predicates

def is_truthy(value: Value) -> bool:
    """Everything except nil and false counts as true."""
    if isinstance(value, Nil):
        return False
    if isinstance(value, Boolean):
        return value.value
    return True


def is_value_tuple(term: Term) -> bool:
    return isinstance(term, Tuple_) and all(isinstance(i, Value) for i in term.items)


def is_multi_done(term: Term) -> bool:
    """A finished expression in a position that accepts several values."""
    return isinstance(term, Value) or is_value_tuple(term)


def first_value(items) -> Value:
    return items[0] if items else NIL


def flatten_values(items: Tuple[Expr, ...]) -> List[Value]:
    """Flatten a finished expression list: the final value tuple splices."""
    if not items:
        return []
    result = list(items[:-1])
    last = items[-1]
    if isinstance(last, Tuple_):
        result.extend(last.items)
    else:
        result.append(last)
    return result  # type: ignore[return-value]


def adjust(values: List[Value], count: int) -> List[Value]:
    """Pad with nil or truncate to exactly ``count`` values."""
    if len(values) >= count:
        return values[:count]
    return values + [NIL] * (count - len(values))


def type_name(value: Value) -> str:
    if isinstance(value, Nil):
        return "nil"
    if isinstance(value, Boolean):
        return "boolean"
    if isinstance(value, Number):
        return "number"
    if isinstance(value, String):
        return "string"
    if isinstance(value, FunctionDef):
        return "function"
    if isinstance(value, ObjRef):
        return "table"
    raise EngineFault(f"not a value: {value!r}")
