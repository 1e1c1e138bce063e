"""
Reduction relations over a redex and the stores.

Each ``step_*`` function is a partial function: it returns a StepResult when
one of its rules matches the redex, and None otherwise. The relations are
mutually exclusive, so at most one of them (and one rule inside it) applies
to any redex.

Rule identifiers name the construct and the case, for example ``while/wrap``
or ``index/absent``; traces print them next to every step.

The stores are changed in place. Callers that only want to know whether a
rule applies pass forked stores (see :meth:`ValueStore.fork`).
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional

from lua_semantics.core import delta as prim
from lua_semantics.core.decompose import label_focus
from lua_semantics.core.library import PURE, REGISTRY, Host, where
from lua_semantics.core.store import ObjectStore, TableObject, ValueStore
from lua_semantics.core.terms import (
    EMPTY_TUPLE, SKIP, VARARG_NAME, Assign, BinOp, Break, BuiltIn, Call,
    CallStat, EngineFault, Expr, FunctionDef, If, Index, Iter, Label, LabeledExpr,
    LabeledStmt, Local, MethodCall, Nil, Number, ObjRef, Paren, Ref, Return, Seq, Skip, Stmt,
    String, TableCons, Term, Tuple_, UnOp, Value, While, adjust, first_value, flatten_values,
    is_multi_done, is_truthy, is_value_tuple, substitute,
)

COMPARISON_OPERATORS = ("<", "<=", ">", ">=")


@dataclass(frozen=True)
class StepResult:
    """Outcome of one rule: the stores (None when the rule never looks at them), the new term and the rule."""
    sigma: Optional[ValueStore]
    theta: Optional[ObjectStore]
    term: Term
    rule_id: str


def _result(term: Term, rule_id: str, sigma=None, theta=None) -> StepResult:
    return StepResult(sigma, theta, term, rule_id)


def _done(items) -> bool:
    """An expression list whose evaluation has finished."""
    if not items:
        return True
    return all(isinstance(i, Value) for i in items[:-1]) and is_multi_done(items[-1])


def error_term(message: str, pos=None) -> Expr:
    """``$builtIn error(msg, 0)`` with the position prefix of ``pos`` already applied."""
    text = (where(pos) + message).encode("utf-8")
    return BuiltIn("error", (String(text), Number(0.0)), pos)


# Stateless statements

def step_stateless_stmt(redex: Term) -> Optional[StepResult]:
    """Conditionals, loops, sequencing and ``break``."""
    if isinstance(redex, If) and isinstance(redex.cond, Value):
        if is_truthy(redex.cond):
            return _result(redex.then, "if/then")
        return _result(redex.orelse, "if/else")
    if isinstance(redex, While):
        return _result(LabeledStmt(Label.BREAK, Iter(redex.cond, redex.body)), "while/wrap")
    if isinstance(redex, Iter):
        unfolded = If(redex.cond, Seq(redex.body, redex), SKIP)
        return _result(unfolded, "iter/unfold")
    if isinstance(redex, Seq) and isinstance(redex.first, Skip):
        return _result(redex.rest, "seq/skip")
    if isinstance(redex, LabeledStmt) and redex.label is Label.BREAK:
        if isinstance(redex.body, Skip):
            return _result(SKIP, "break/skip")
        if isinstance(label_focus(redex), Break):
            return _result(SKIP, "break/exit")
    return None


# Stateless expressions

def step_stateless_expr(redex: Term) -> Optional[StepResult]:
    """Operators on values, parentheses and tuple normalization."""
    if isinstance(redex, BinOp) and isinstance(redex.left, Value):
        if redex.op in ("and", "or"):
            return _logic(redex)
        if isinstance(redex.right, Value):
            return _binary(redex)
        return None
    if isinstance(redex, UnOp) and isinstance(redex.operand, Value):
        return _unary(redex)
    if isinstance(redex, Paren):
        if isinstance(redex.expr, Value):
            return _result(redex.expr, "paren/value")
        if is_value_tuple(redex.expr):
            return _result(first_value(redex.expr.items), "paren/tuple")
        return None
    if isinstance(redex, Tuple_) and _done(redex.items):
        if is_value_tuple(redex):
            return _result(first_value(redex.items), "tuple/truncate")
        return _result(Tuple_(tuple(flatten_values(redex.items))), "tuple/flatten")
    return None


def _logic(redex: BinOp) -> StepResult:
    left = redex.left
    if redex.op == "and":
        return _result(redex.right if is_truthy(left) else left, "logic/and")
    return _result(left if is_truthy(left) else redex.right, "logic/or")


def _binary(redex: BinOp) -> Optional[StepResult]:
    op, left, right = redex.op, redex.left, redex.right
    if op in prim.ARITH_OPERATORS:
        value = prim.apply_operator(op, left, right)
        if value is None:
            return _result(LabeledExpr(Label.ARITH_WO, redex, redex.pos), "arith/wrong-operands")
        coerced = isinstance(left, String) or isinstance(right, String)
        return _result(value, "arith/coerce" if coerced else "arith/number")
    if op == "..":
        value = prim.apply_operator(op, left, right)
        if value is None:
            return _result(LabeledExpr(Label.CONCAT_WO, redex, redex.pos), "concat/wrong-operands")
        return _result(value, "concat/values")
    if op in COMPARISON_OPERATORS:
        value = prim.apply_operator(op, left, right)
        if value is None:
            return _result(LabeledExpr(Label.ORD_WO, redex, redex.pos), "compare/wrong-operands")
        return _result(value, "compare/values")
    if op == "==":
        if isinstance(left, ObjRef) and isinstance(right, ObjRef) and left != right:
            return _result(LabeledExpr(Label.EQ_FAIL, redex, redex.pos), "eq/fail")
        return _result(prim.apply_operator(op, left, right), "eq/raw")
    raise EngineFault(f"unknown binary operator {op}")


def _unary(redex: UnOp) -> Optional[StepResult]:
    operand = redex.operand
    if redex.op == "not":
        return _result(prim.apply_operator("not", operand), "logic/not")
    if redex.op == "-":
        value = prim.apply_operator("neg", operand)
        if value is None:
            return _result(LabeledExpr(Label.NEG_WO, redex, redex.pos), "neg/wrong-operands")
        return _result(value, "neg/coerce" if isinstance(operand, String) else "neg/number")
    if redex.op == "#":
        if isinstance(operand, ObjRef):
            # tables may carry __len; the stateful relation decides
            return None
        value = prim.apply_operator("#", operand)
        if value is None:
            return _result(LabeledExpr(Label.LEN_WO, redex, redex.pos), "len/wrong-operands")
        return _result(value, "len/string")
    raise EngineFault(f"unknown unary operator {redex.op}")


# Stateful rules

def step_stateful(redex: Term, sigma: ValueStore, theta: ObjectStore) -> Optional[StepResult]:
    """Locals, assignment, dereference, field access and table construction."""
    if isinstance(redex, Local) and _done(redex.exprs):
        values = adjust(flatten_values(redex.exprs), len(redex.names))
        bindings: Dict[str, Term] = {}
        for name, value in zip(redex.names, values):
            bindings[name] = sigma.alloc(value, hint=name)
        return _result(substitute(redex.body, bindings), "local/alloc", sigma, theta)
    if isinstance(redex, Assign):
        return _assign(redex, sigma, theta)
    if isinstance(redex, Ref):
        return _result(sigma.read(redex), "ref/deref", sigma, theta)
    if isinstance(redex, Index) and isinstance(redex.obj, Value) and isinstance(redex.key, Value):
        if not isinstance(redex.obj, ObjRef):
            return _result(LabeledExpr(Label.INDEX, redex, redex.pos), "index/non-table", sigma, theta)
        value = theta.rawget(redex.obj, redex.key)
        if isinstance(value, Nil):
            return _result(LabeledExpr(Label.INDEX, redex, redex.pos), "index/absent", sigma, theta)
        return _result(value, "index/present", sigma, theta)
    if isinstance(redex, TableCons) and _constructor_done(redex):
        return _construct(redex, sigma, theta)
    if isinstance(redex, UnOp) and redex.op == "#" and isinstance(redex.operand, ObjRef):
        if isinstance(prim.indexmetatable(redex.operand, "__len", theta), Nil):
            return _result(Number(float(theta.get(redex.operand).border())), "len/table", sigma, theta)
        return _result(LabeledExpr(Label.LEN_WO, redex, redex.pos), "len/handler", sigma, theta)
    return None


def _lvalue_ready(target: Term) -> bool:
    if isinstance(target, Ref):
        return True
    return isinstance(target, Index) and isinstance(target.obj, Value) and isinstance(target.key, Value)


def _assign(redex: Assign, sigma: ValueStore, theta: ObjectStore) -> Optional[StepResult]:
    if not all(_lvalue_ready(t) for t in redex.targets) or not _done(redex.exprs):
        return None
    if len(redex.targets) == 1 and len(redex.exprs) == 1 and isinstance(redex.exprs[0], Value):
        target, value = redex.targets[0], redex.exprs[0]
        if isinstance(target, Ref):
            sigma.write(target, value)
            return _result(SKIP, "assign/ref", sigma, theta)
        if not isinstance(target.obj, ObjRef):
            return _result(LabeledStmt(Label.NEW_INDEX, redex, target.pos),
                           "newindex/non-table", sigma, theta)
        if isinstance(theta.rawget(target.obj, target.key), Nil):
            return _result(LabeledStmt(Label.NEW_INDEX, redex, target.pos),
                           "newindex/absent", sigma, theta)
        theta.rawset(target.obj, target.key, value)
        return _result(SKIP, "newindex/present", sigma, theta)
    # the reference interpreter stores right to left
    values = adjust(flatten_values(redex.exprs), len(redex.targets))
    singles: List[Stmt] = [Assign((t,), (v,)) for t, v in zip(redex.targets, values)]
    singles.reverse()
    term: Stmt = singles[-1]
    for single in reversed(singles[:-1]):
        term = Seq(single, term)
    return _result(term, "assign/multiple", sigma, theta)


def _constructor_done(redex) -> bool:
    last = len(redex.values) - 1
    for i, (key, value) in enumerate(zip(redex.keys, redex.values)):
        if key is not None and not isinstance(key, Value):
            return False
        multi = i == last and key is None
        if not (is_multi_done(value) if multi else isinstance(value, Value)):
            return False
    return True


def _construct(redex, sigma: ValueStore, theta: ObjectStore) -> StepResult:
    table = TableObject()
    positional: List[Value] = []
    last = len(redex.values) - 1
    for i, (key, value) in enumerate(zip(redex.keys, redex.values)):
        if key is None:
            if i == last and isinstance(value, Tuple_):
                positional.extend(value.items)
            else:
                positional.append(value)
            continue
        if isinstance(key, Nil) or (isinstance(key, Number) and math.isnan(key.value)):
            message = "table index is nil" if isinstance(key, Nil) else "table index is NaN"
            return _result(error_term(message, redex.pos), "table/bad-key", sigma, theta)
        table.rawset(key, value)
    # positional fields are stored after the keyed ones, as the reference interpreter does
    for n, value in enumerate(positional, start=1):
        table.rawset(Number(float(n)), value)
    return _result(theta.alloc(table), "table/construct", sigma, theta)


# Function calls

def _enter(function: FunctionDef, args, sigma: ValueStore) -> Stmt:
    """Bind parameters to fresh references and ``...`` to the surplus arguments."""
    values = flatten_values(args)
    bindings: Dict[str, Term] = {}
    for name, value in zip(function.params, adjust(values, len(function.params))):
        bindings[name] = sigma.alloc(value, hint=name)
    if function.is_vararg:
        bindings[VARARG_NAME] = Tuple_(tuple(values[len(function.params):]))
    return substitute(function.body, bindings)


def _ready_call(term: Term) -> bool:
    return isinstance(term, Call) and isinstance(term.fn, Value) and _done(term.args)


def step_funcall(redex: Term, sigma: ValueStore, theta: ObjectStore) -> Optional[StepResult]:
    """Calls, method calls and ``return``."""
    if _ready_call(redex):
        if not isinstance(redex.fn, FunctionDef):
            return _result(LabeledExpr(Label.WFUN_CALL, redex, redex.pos),
                           "call/non-function", sigma, theta)
        body = _enter(redex.fn, redex.args, sigma)
        rule = "call/vararg" if redex.fn.is_vararg else "call/fixed"
        return _result(LabeledExpr(Label.RETURN, body, redex.pos), rule, sigma, theta)
    if isinstance(redex, CallStat):
        call = redex.call
        if is_multi_done(call):
            return _result(SKIP, "callstat/discard", sigma, theta)
        if _ready_call(call):
            if not isinstance(call.fn, FunctionDef):
                return _result(CallStat(LabeledExpr(Label.WFUN_CALL, call, call.pos)),
                               "call/non-function", sigma, theta)
            body = _enter(call.fn, call.args, sigma)
            rule = "call/vararg" if call.fn.is_vararg else "call/fixed"
            return _result(LabeledStmt(Label.RETURN, body, call.pos), rule, sigma, theta)
        return None
    if isinstance(redex, MethodCall) and isinstance(redex.obj, Value):
        method = Index(redex.obj, String(redex.method.encode("utf-8")), redex.pos)
        return _result(Call(method, (redex.obj,) + redex.args, redex.pos),
                       "method/rewrite", sigma, theta)
    if isinstance(redex, (LabeledExpr, LabeledStmt)):
        return _return(redex, sigma, theta)
    return None


def _return(redex, sigma: ValueStore, theta: ObjectStore) -> Optional[StepResult]:
    statement = isinstance(redex, LabeledStmt)
    if redex.label is Label.RETURN:
        if isinstance(redex.body, Skip):
            return _result(SKIP if statement else EMPTY_TUPLE, "return/skip", sigma, theta)
        focus = label_focus(redex)
        if isinstance(focus, Return):
            if statement:
                return _result(SKIP, "return/values", sigma, theta)
            return _result(Tuple_(tuple(flatten_values(focus.exprs))), "return/values", sigma, theta)
        return None
    if redex.label is Label.BREAK and statement:
        focus = label_focus(redex)
        if isinstance(focus, Return):
            return _result(focus, "return/break", sigma, theta)
    return None


# Library services

def step_builtin(redex: Term, sigma: ValueStore, theta: ObjectStore,
                 host: Optional[Host] = None) -> Optional[StepResult]:
    """
    ``$builtIn name(v, ...)``: hand the arguments to the library service.

    Pure services are not given the object store at all.

    Raises:
        EngineFault: If no service is registered under the name
    """
    if not isinstance(redex, BuiltIn) or not _done(redex.args):
        return None
    entry = REGISTRY.get(redex.name)
    if entry is None:
        raise EngineFault(f"unknown builtin service {redex.name}")
    store = None if entry.category == PURE else theta
    term = prim.delta(redex.name, *flatten_values(redex.args), theta=store, host=host)
    return _result(term, f"builtin/{redex.name}", sigma, theta)
