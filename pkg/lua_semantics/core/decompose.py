"""
Decomposition of a term into an evaluation context and a redex.

An evaluation context is kept as the list of frames on the path from the
root to the hole: each frame is a node together with the slot that holds
the hole. Plugging rebuilds the path bottom-up.

Child positions are either *single* (exactly one value is wanted; a tuple
found there is itself a redex and is truncated) or *multi* (the final
element of an argument, return or constructor list, where a finished tuple
is left alone so the enclosing rule can splice it).

``break``, a finished ``return`` and ``$err v`` are not redexes by
themselves: the redex is the nearest enclosing labeled term that can
consume them (any label for ``break``/``return``, a protected-mode label for
errors). When there is none the whole term is the redex.

Every step decomposes the term again from the root, so a step costs time
proportional to the depth of the term. Deep recursion in a Lua program
slows each step down accordingly; no context is cached between steps.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

from lua_semantics.core.terms import (
    FALLBACK_LABELS, Assign, BinOp, Break, BuiltIn, Call, CallStat, EngineFault, ErrorValue,
    Expr, FunctionDef, If, Index, Iter, Label, LabeledExpr, LabeledStmt, Local, MethodCall,
    Name, Paren, Ref, Return, Seq, Skip, Stmt, TableCons, Term, Tuple_, UnOp, Value, Vararg,
    While, child_fields, is_multi_done, is_value_tuple, rebuild,
)


class PlugFault(EngineFault):
    """Exception raised when a term of the wrong category is plugged into a hole."""
    pass


Slot = Tuple[str, Optional[int]]


@dataclass(frozen=True)
class Frame:
    """One step of an evaluation context: ``node`` with its ``slot`` child as the hole."""
    node: Term
    slot: Slot

    def fill(self, term: Term) -> Term:
        attr, index = self.slot
        expected = _hole_category(self.node, attr)
        if not isinstance(term, expected):
            raise PlugFault(f"cannot plug {type(term).__name__} into "
                            f"{type(self.node).__name__}.{attr}")
        if index is None:
            return rebuild(self.node, attr, term)
        items = list(getattr(self.node, attr))
        items[index] = term
        return rebuild(self.node, attr, tuple(items))

    @property
    def label(self) -> Optional[Label]:
        if isinstance(self.node, (LabeledExpr, LabeledStmt)):
            return self.node.label
        return None


@dataclass(frozen=True)
class EvaluationContext:
    """A term with one hole, as the frames from the root down to the hole."""
    frames: Tuple[Frame, ...] = ()

    def plug(self, term: Term) -> Term:
        for frame in reversed(self.frames):
            term = frame.fill(term)
        return term

    def __len__(self) -> int:
        return len(self.frames)

    def labels(self) -> List[Label]:
        """Labels on the hole path, outermost first."""
        return [f.label for f in self.frames if f.label is not None]

    def call_sites(self):
        """Positions of the enclosing Return-labeled call frames, innermost first."""
        return [f.node.pos for f in reversed(self.frames) if f.label is Label.RETURN]


@dataclass(frozen=True)
class Decomposition:
    """Context and redex; ``focus`` is the term that selected the redex."""
    context: EvaluationContext
    redex: Term
    focus: Term


@dataclass(frozen=True)
class Answer:
    """A final term: ``;``, a value or value tuple, or ``$err v``."""
    term: Term


def plug(context: EvaluationContext, term: Term) -> Term:
    """Fill the hole of ``context`` with ``term``.

    Raises:
        PlugFault: If ``term`` is a statement where an expression is expected or vice versa
    """
    return context.plug(term)


_STATEMENT_SLOTS = {
    (Seq, "first"), (Seq, "rest"), (If, "then"), (If, "orelse"), (While, "body"),
    (Iter, "body"), (Local, "body"), (LabeledStmt, "body"), (FunctionDef, "body"),
}


def _hole_category(node: Term, attr: str) -> type:
    if (type(node), attr) in _STATEMENT_SLOTS:
        return Stmt
    if isinstance(node, LabeledExpr):
        # call frames wrap a statement body, protected mode wraps an expression
        return Term
    return Expr


def is_answer(term: Term) -> bool:
    return (isinstance(term, (Skip, Value, ErrorValue))
            or is_value_tuple(term))


# Descent

def _list_slot(items) -> Optional[int]:
    """First position of an expression list that still needs evaluation."""
    last = len(items) - 1
    for i, item in enumerate(items):
        if i == last:
            if not is_multi_done(item):
                return i
        elif not isinstance(item, Value):
            return i
    return None


def _is_ready_return(term: Term) -> bool:
    return isinstance(term, Return) and _list_slot(term.exprs) is None


def _next_slot(node: Term) -> Optional[Tuple[Slot, Term]]:
    """The child to descend into, or None when ``node`` is itself the focus."""
    if isinstance(node, Seq):
        if isinstance(node.first, Skip):
            return None
        return ("first", None), node.first
    if isinstance(node, (Call, BuiltIn)):
        if isinstance(node, Call) and not isinstance(node.fn, Value):
            return ("fn", None), node.fn
        i = _list_slot(node.args)
        if i is not None:
            return ("args", i), node.args[i]
        return None
    if isinstance(node, Index):
        if not isinstance(node.obj, Value):
            return ("obj", None), node.obj
        if not isinstance(node.key, Value):
            return ("key", None), node.key
        return None
    if isinstance(node, BinOp):
        if not isinstance(node.left, Value):
            return ("left", None), node.left
        if node.op in ("and", "or"):
            return None
        if not isinstance(node.right, Value):
            return ("right", None), node.right
        return None
    if isinstance(node, UnOp):
        if not isinstance(node.operand, Value):
            return ("operand", None), node.operand
        return None
    if isinstance(node, If):
        if not isinstance(node.cond, Value):
            return ("cond", None), node.cond
        return None
    if isinstance(node, Local):
        i = _list_slot(node.exprs)
        if i is not None:
            return ("exprs", i), node.exprs[i]
        return None
    if isinstance(node, Assign):
        return _assign_slot(node)
    if isinstance(node, Return):
        i = _list_slot(node.exprs)
        if i is not None:
            return ("exprs", i), node.exprs[i]
        return None
    if isinstance(node, CallStat):
        call = node.call
        if is_multi_done(call):
            return None
        if (isinstance(call, Call) and isinstance(call.fn, Value)
                and _list_slot(call.args) is None):
            return None
        return ("call", None), call
    if isinstance(node, Tuple_):
        i = _list_slot(node.items)
        if i is not None:
            return ("items", i), node.items[i]
        return None
    if isinstance(node, Paren):
        if not is_multi_done(node.expr):
            return ("expr", None), node.expr
        return None
    if isinstance(node, MethodCall):
        if not isinstance(node.obj, Value):
            return ("obj", None), node.obj
        return None
    if isinstance(node, TableCons):
        last = len(node.values) - 1
        for i in range(len(node.values)):
            key = node.keys[i]
            if key is not None and not isinstance(key, Value):
                return ("keys", i), key
            value = node.values[i]
            multi = i == last and key is None
            if not (is_multi_done(value) if multi else isinstance(value, Value)):
                return ("values", i), value
        return None
    if isinstance(node, (LabeledExpr, LabeledStmt)):
        if node.label in FALLBACK_LABELS:
            return None
        body = node.body
        if isinstance(body, Skip) or (isinstance(node, LabeledExpr) and is_multi_done(body)):
            return None
        return ("body", None), body
    # names, references, varargs, loops, break, $err and values are foci
    return None


def _assign_slot(node: Assign) -> Optional[Tuple[Slot, Term]]:
    for i, target in enumerate(node.targets):
        if isinstance(target, Index):
            if not isinstance(target.obj, Value):
                return ("targets", i), target
            if not isinstance(target.key, Value):
                return ("targets", i), target
    i = _list_slot(node.exprs)
    if i is not None:
        return ("exprs", i), node.exprs[i]
    return None


def descend(term: Term) -> Tuple[List[Frame], Term]:
    """Walk evaluation positions down to the innermost focus."""
    frames: List[Frame] = []
    node = term
    while True:
        step = _next_slot(node)
        if step is None:
            return frames, node
        slot, child = step
        frames.append(Frame(node, slot))
        if isinstance(node, Assign) and slot[0] == "targets":
            # lvalue: descend through the Index into its unfinished part
            index_node = child
            if not isinstance(index_node.obj, Value):
                frames.append(Frame(index_node, ("obj", None)))
                node = index_node.obj
            else:
                frames.append(Frame(index_node, ("key", None)))
                node = index_node.key
            continue
        node = child


def is_control_focus(term: Term) -> bool:
    return isinstance(term, (Break, ErrorValue)) or _is_ready_return(term)


def _consumer_index(frames: List[Frame], focus: Term) -> Optional[int]:
    """Index of the frame whose node consumes a break, return or error focus."""
    for i in range(len(frames) - 1, -1, -1):
        label = frames[i].label
        if label is None:
            continue
        if isinstance(focus, ErrorValue):
            if label is Label.PROT_MD:
                return i
        else:
            return i
    return None


def decompose(term: Term) -> Union[Decomposition, Answer]:
    """
    Split a term into evaluation context and redex.

    Args:
        term: A statement or expression (the body of a configuration)

    Returns:
        An Answer when the term is final, otherwise the unique Decomposition
    """
    if is_answer(term):
        return Answer(term)
    frames, focus = descend(term)
    if is_control_focus(focus):
        k = _consumer_index(frames, focus)
        if k is None:
            return Decomposition(EvaluationContext(), term, focus)
        return Decomposition(EvaluationContext(tuple(frames[:k])), frames[k].node, focus)
    return Decomposition(EvaluationContext(tuple(frames)), focus, focus)


def label_focus(labeled: Term) -> Optional[Term]:
    """Control focus of a labeled term's body, if nothing in between intercepts it.

    This is the ``break`` or ``return`` reached through plain statement frames,
    or the ``$err v`` reached through any frames when the label is the
    protected-call label.
    """
    if not isinstance(labeled, (LabeledExpr, LabeledStmt)):
        return None
    frames, focus = descend(labeled.body)
    if not is_control_focus(focus):
        return None
    if _consumer_index(frames, focus) is not None:
        return None
    if isinstance(focus, ErrorValue) and labeled.label is not Label.PROT_MD:
        return None
    return focus


def innermost_label_context(term: Term, label: Label) -> bool:
    """True iff ``term`` carries ``label`` and its body's ``break``, ``return`` or
    ``$err`` reaches it without a closer label intercepting."""
    if not isinstance(term, (LabeledExpr, LabeledStmt)) or term.label is not label:
        return False
    return label_focus(term) is not None


def unconsumed_control_focus(term: Term) -> Optional[Term]:
    """The ``break``, ``return`` or ``$err`` focus of ``term`` when no label on its path consumes it."""
    frames, focus = descend(term)
    if is_control_focus(focus) and _consumer_index(frames, focus) is None:
        return focus
    return None


# Exhaustive splitting, independent of the descent order above

_MULTI_LISTS = {(Call, "args"), (BuiltIn, "args"), (Return, "exprs"), (Local, "exprs"),
                (Assign, "exprs"), (Tuple_, "items")}


def _values_before(items, i: int) -> bool:
    return all(isinstance(item, Value) for item in items[:i])


def _is_final(node: Term, slot: Slot, child: Term) -> bool:
    """Whether ``child`` is already done for the position it occupies."""
    if isinstance(child, (Value, Skip)):
        return True
    if not is_value_tuple(child):
        return False
    attr, index = slot
    if (type(node), attr) in _MULTI_LISTS:
        return index == len(getattr(node, attr)) - 1
    if isinstance(node, TableCons) and attr == "values":
        return index == len(node.values) - 1 and node.keys[index] is None
    return isinstance(node, (Paren, LabeledExpr, CallStat))


def _lvalue_done(target: Term) -> bool:
    return not isinstance(target, Index) or (isinstance(target.obj, Value)
                                             and isinstance(target.key, Value))


def _holes(node: Term):
    """Every ``(frames, child)`` where ``node`` admits a hole at ``child``."""
    if isinstance(node, Seq):
        yield [Frame(node, ("first", None))], node.first
    elif isinstance(node, If):
        yield [Frame(node, ("cond", None))], node.cond
    elif isinstance(node, (Local, Return, Tuple_)):
        attr = "items" if isinstance(node, Tuple_) else "exprs"
        items = getattr(node, attr)
        for i, item in enumerate(items):
            if _values_before(items, i):
                yield [Frame(node, (attr, i))], item
    elif isinstance(node, Assign):
        for i, target in enumerate(node.targets):
            if not all(_lvalue_done(t) for t in node.targets[:i]) or not isinstance(target, Index):
                continue
            frame = Frame(node, ("targets", i))
            yield [frame, Frame(target, ("obj", None))], target.obj
            if isinstance(target.obj, Value):
                yield [frame, Frame(target, ("key", None))], target.key
        if all(_lvalue_done(t) for t in node.targets):
            for i, item in enumerate(node.exprs):
                if _values_before(node.exprs, i):
                    yield [Frame(node, ("exprs", i))], item
    elif isinstance(node, CallStat):
        call = node.call
        ready = (isinstance(call, Call) and isinstance(call.fn, Value)
                 and _list_slot(call.args) is None)
        if not ready:
            yield [Frame(node, ("call", None))], call
    elif isinstance(node, (Call, BuiltIn)):
        if isinstance(node, Call):
            yield [Frame(node, ("fn", None))], node.fn
        if not isinstance(node, Call) or isinstance(node.fn, Value):
            for i, item in enumerate(node.args):
                if _values_before(node.args, i):
                    yield [Frame(node, ("args", i))], item
    elif isinstance(node, Index):
        yield [Frame(node, ("obj", None))], node.obj
        if isinstance(node.obj, Value):
            yield [Frame(node, ("key", None))], node.key
    elif isinstance(node, BinOp):
        yield [Frame(node, ("left", None))], node.left
        if isinstance(node.left, Value) and node.op not in ("and", "or"):
            yield [Frame(node, ("right", None))], node.right
    elif isinstance(node, UnOp):
        yield [Frame(node, ("operand", None))], node.operand
    elif isinstance(node, Paren):
        yield [Frame(node, ("expr", None))], node.expr
    elif isinstance(node, MethodCall):
        yield [Frame(node, ("obj", None))], node.obj
    elif isinstance(node, TableCons):
        for i in range(len(node.values)):
            if not all(isinstance(v, Value) and (k is None or isinstance(k, Value))
                       for k, v in zip(node.keys[:i], node.values[:i])):
                break
            key = node.keys[i]
            if key is not None:
                yield [Frame(node, ("keys", i))], key
                if not isinstance(key, Value):
                    continue
            yield [Frame(node, ("values", i))], node.values[i]
    elif isinstance(node, (LabeledExpr, LabeledStmt)):
        if node.label not in FALLBACK_LABELS:
            yield [Frame(node, ("body", None))], node.body


def all_splits(term: Term):
    """
    Enumerate every split of ``term`` into an evaluation context and a subterm.

    Unlike :func:`decompose`, this does not pick one path: it follows every
    child position an evaluation context may pass through. Subterms that are
    already finished for their position are not reported.

    Yields:
        ``(EvaluationContext, subterm)`` pairs, the root split first
    """
    pending = [((), term)]
    while pending:
        frames, node = pending.pop()
        yield EvaluationContext(frames), node
        for extra, child in _holes(node):
            parent, slot = extra[-1].node, extra[-1].slot
            if _is_final(parent, slot, child):
                continue
            pending.append((frames + tuple(extra), child))
