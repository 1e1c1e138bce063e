"""
Metatable fallbacks for labeled operations.

A fallback label marks an operation the primitive rules could not carry out:
arithmetic on a table, indexing a missing key, calling a number, and so on.
The rules here look for the matching event handler and either call it,
re-dispatch the operation on the handler, or raise the error the reference
interpreter raises.

Handlers for events that produce one value are wrapped in parentheses, so a
handler returning several values still yields exactly one.
"""

from typing import Optional

from lua_semantics.core import delta as prim
from lua_semantics.core.relations import StepResult, error_term
from lua_semantics.core.store import ObjectStore, ValueStore
from lua_semantics.core.terms import (
    FALSE, NIL, SKIP, Assign, BinOp, Call, CallStat, FunctionDef, Index, Label, LabeledExpr,
    LabeledStmt, Nil, Number, ObjRef, Paren, String, Term, UnOp, Value, type_name,
)


def _result(term: Term, rule_id: str, sigma: ValueStore, theta: ObjectStore) -> StepResult:
    return StepResult(sigma, theta, term, rule_id)


def _call_one(handler: Value, args, pos) -> Paren:
    return Paren(Call(handler, tuple(args), pos))


def _truth_of(call: Call, pos) -> UnOp:
    """``not not h(...)``: the handler's first result as a boolean."""
    return UnOp("not", UnOp("not", call, pos), pos)


def step_metatable(redex: Term, sigma: ValueStore, theta: ObjectStore) -> Optional[StepResult]:
    """
    Resolve a term carrying a fallback label.

    Args:
        redex: A labeled expression or statement
        sigma: Value store (untouched)
        theta: Object store; only a raw field update without handler changes it

    Returns:
        The rewrite for the label, or None when ``redex`` is not a fallback-labeled term
    """
    if not isinstance(redex, (LabeledExpr, LabeledStmt)):
        return None
    handler = _HANDLERS.get(redex.label)
    if handler is None:
        return None
    return handler(redex, sigma, theta)


def _arith(redex: LabeledExpr, sigma, theta) -> Optional[StepResult]:
    body = redex.body
    if not isinstance(body, BinOp) or body.op not in prim.ARITH_OPERATORS:
        return None
    left, right = body.left, body.right
    handler = prim.getbinhandler(left, right, prim.binopeventkey(body.op), theta)
    if not isinstance(handler, Nil):
        return _result(_call_one(handler, (left, right), body.pos), "meta/arith-handler", sigma, theta)
    culprit = right if prim.to_number(left) is not None else left
    message = prim.errmessage(Label.ARITH_WO, type_name(culprit))
    return _result(error_term(message, body.pos), "meta/arith-error", sigma, theta)


def _concat(redex: LabeledExpr, sigma, theta) -> Optional[StepResult]:
    body = redex.body
    if not isinstance(body, BinOp) or body.op != "..":
        return None
    left, right = body.left, body.right
    handler = prim.getbinhandler(left, right, prim.binopeventkey(".."), theta)
    if not isinstance(handler, Nil):
        return _result(_call_one(handler, (left, right), body.pos), "meta/concat-handler", sigma, theta)
    culprit = right if isinstance(left, (String, Number)) else left
    message = prim.errmessage(Label.CONCAT_WO, type_name(culprit))
    return _result(error_term(message, body.pos), "meta/concat-error", sigma, theta)


def _order(redex: LabeledExpr, sigma, theta) -> Optional[StepResult]:
    body = redex.body
    if not isinstance(body, BinOp) or body.op not in ("<", "<=", ">", ">="):
        return None
    # a > b is b < a, and a >= b is b <= a
    if body.op in (">", ">="):
        op, left, right = ("<" if body.op == ">" else "<="), body.right, body.left
    else:
        op, left, right = body.op, body.left, body.right
    handler = prim.getbinhandler(left, right, prim.binopeventkey(op), theta)
    if not isinstance(handler, Nil):
        call = Call(handler, (left, right), body.pos)
        return _result(_truth_of(call, body.pos), "meta/order-handler", sigma, theta)
    if op == "<=":
        handler = prim.getbinhandler(right, left, prim.binopeventkey("<"), theta)
        if not isinstance(handler, Nil):
            call = Call(handler, (right, left), body.pos)
            return _result(UnOp("not", call, body.pos), "meta/order-le-fallback", sigma, theta)
    message = prim.errmessage(Label.ORD_WO, type_name(left), type_name(right))
    return _result(error_term(message, body.pos), "meta/order-error", sigma, theta)


def _equal(redex: LabeledExpr, sigma, theta) -> Optional[StepResult]:
    body = redex.body
    if not isinstance(body, BinOp) or body.op != "==":
        return None
    handler = prim.getequalhandler(body.left, body.right, theta)
    if isinstance(handler, Nil):
        return _result(FALSE, "meta/eq-false", sigma, theta)
    call = Call(handler, (body.left, body.right), body.pos)
    return _result(_truth_of(call, body.pos), "meta/eq-handler", sigma, theta)


def _negate(redex: LabeledExpr, sigma, theta) -> Optional[StepResult]:
    body = redex.body
    if not isinstance(body, UnOp) or body.op != "-":
        return None
    operand = body.operand
    handler = prim.indexmetatable(operand, "__unm", theta)
    if not isinstance(handler, Nil):
        return _result(_call_one(handler, (operand, operand), body.pos), "meta/neg-handler", sigma, theta)
    message = prim.errmessage(Label.NEG_WO, type_name(operand))
    return _result(error_term(message, body.pos), "meta/neg-error", sigma, theta)


def _length(redex: LabeledExpr, sigma, theta) -> Optional[StepResult]:
    body = redex.body
    if not isinstance(body, UnOp) or body.op != "#":
        return None
    operand = body.operand
    handler = prim.indexmetatable(operand, "__len", theta)
    if not isinstance(handler, Nil):
        return _result(_call_one(handler, (operand, operand), body.pos), "meta/len-handler", sigma, theta)
    if isinstance(operand, ObjRef):
        return _result(Number(float(theta.get(operand).border())), "meta/len-raw", sigma, theta)
    message = prim.errmessage(Label.LEN_WO, type_name(operand))
    return _result(error_term(message, body.pos), "meta/len-error", sigma, theta)


def _index(redex: LabeledExpr, sigma, theta) -> Optional[StepResult]:
    body = redex.body
    if not isinstance(body, Index):
        return None
    obj, key = body.obj, body.key
    handler = prim.indexmetatable(obj, "__index", theta)
    if isinstance(handler, Nil):
        if isinstance(obj, ObjRef):
            return _result(NIL, "meta/index-nil", sigma, theta)
        message = prim.errmessage(Label.INDEX, type_name(obj))
        return _result(error_term(message, body.pos), "meta/index-error", sigma, theta)
    if isinstance(handler, FunctionDef):
        return _result(_call_one(handler, (obj, key), body.pos), "meta/index-function", sigma, theta)
    return _result(Index(handler, key, body.pos), "meta/index-table", sigma, theta)


def _new_index(redex: LabeledStmt, sigma, theta) -> Optional[StepResult]:
    body = redex.body
    if not isinstance(body, Assign) or len(body.targets) != 1 or not isinstance(body.targets[0], Index):
        return None
    target, value = body.targets[0], body.exprs[0]
    obj, key = target.obj, target.key
    handler = prim.indexmetatable(obj, "__newindex", theta)
    if isinstance(handler, Nil):
        if not isinstance(obj, ObjRef):
            message = prim.errmessage(Label.NEW_INDEX, type_name(obj))
            return _result(CallStat(error_term(message, target.pos)), "meta/newindex-error", sigma, theta)
        if isinstance(key, Nil) or (isinstance(key, Number) and key.value != key.value):
            message = "table index is nil" if isinstance(key, Nil) else "table index is NaN"
            return _result(CallStat(error_term(message, target.pos)), "meta/newindex-bad-key", sigma, theta)
        theta.rawset(obj, key, value)
        return _result(SKIP, "meta/newindex-raw", sigma, theta)
    if isinstance(handler, FunctionDef):
        call = Call(handler, (obj, key, value), target.pos)
        return _result(CallStat(call), "meta/newindex-function", sigma, theta)
    return _result(Assign((Index(handler, key, target.pos),), (value,)), "meta/newindex-table", sigma, theta)


def _call(redex: LabeledExpr, sigma, theta) -> Optional[StepResult]:
    body = redex.body
    if not isinstance(body, Call):
        return None
    handler = prim.indexmetatable(body.fn, "__call", theta)
    if isinstance(handler, Nil):
        message = prim.errmessage(Label.WFUN_CALL, type_name(body.fn))
        return _result(error_term(message, body.pos), "meta/call-error", sigma, theta)
    return _result(Call(handler, (body.fn,) + body.args, body.pos), "meta/call-handler", sigma, theta)


_HANDLERS = {
    Label.ARITH_WO: _arith,
    Label.CONCAT_WO: _concat,
    Label.ORD_WO: _order,
    Label.EQ_FAIL: _equal,
    Label.NEG_WO: _negate,
    Label.LEN_WO: _length,
    Label.INDEX: _index,
    Label.NEW_INDEX: _new_index,
    Label.WFUN_CALL: _call,
}
