"""
Rendering of terms as Lua-like text.

Two styles are supported. *Source* style produces text the parser reads
back into the same term (modulo FunctionLabels); it is used by
``string.dump`` and by the ``parse`` command. *Trace* style also shows the
run-time constructs (``$r3``, ``$objr1``, ``<1, 2>``, ``(s)^Break``,
``$iter``, ``$err v``) and can truncate deep subterms.
"""

import re
from typing import List, Optional

from lua_semantics.core.lexer import KEYWORDS
from lua_semantics.core.terms import (
    Assign, BinOp, Boolean, Break, BuiltIn, Call, CallStat, ErrorValue, FunctionDef, If,
    Index, Iter, LabeledExpr, LabeledStmt, Local, MethodCall, Name, Nil, Number, ObjRef,
    Paren, Ref, Return, Seq, Skip, String, TableCons, Term, Tuple_, UnOp, Vararg, While,
)

ELLIPSIS = "⋯"
_IDENTIFIER_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def format_number_literal(x: float) -> str:
    if x != x:
        return "(0/0)"
    if x in (float("inf"), float("-inf")):
        return "1e999" if x > 0 else "-1e999"
    if x == int(x) and abs(x) < 1e15:
        return "%d" % x if not (x == 0 and str(x).startswith("-")) else "-0"
    return repr(x)


def format_string_literal(data: bytes) -> str:
    out = ['"']
    for byte in data:
        ch = chr(byte)
        if ch == '"' or ch == "\\":
            out.append("\\" + ch)
        elif ch == "\n":
            out.append("\\n")
        elif 32 <= byte < 127:
            out.append(ch)
        else:
            out.append("\\%03d" % byte)
    out.append('"')
    return "".join(out)


def is_identifier(data: bytes) -> bool:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError:
        return False
    return bool(_IDENTIFIER_RE.match(text)) and text not in KEYWORDS


class Renderer:
    """Renders terms in source or trace style."""

    def __init__(self, trace: bool = False, max_depth: Optional[int] = None,
                 multiline: bool = False, indent: str = "  "):
        """
        Initialize the renderer.

        Args:
            trace: Show run-time constructs and FunctionLabels
            max_depth: Replace subterms nested deeper than this with an ellipsis
            multiline: Lay statements out one per line with indentation
            indent: Indentation unit for multiline output
        """
        self.trace = trace
        self.max_depth = max_depth
        self.multiline = multiline
        self.indent = indent

    def render(self, term: Term) -> str:
        if isinstance(term, (Skip, Seq, If, While, Iter, Break, Local, Assign, CallStat,
                             Return, LabeledStmt)):
            return self._join(self.stmt_lines(term, 0, 0), 0)
        return self.expr(term, 0)

    # Statements

    def _join(self, lines: List[str], level: int) -> str:
        lines = [line for line in lines if line]
        if self.multiline:
            return "\n".join(lines)
        return "; ".join(line.strip() for line in lines)

    def _pad(self, level: int) -> str:
        return self.indent * level if self.multiline else ""

    def _block(self, term: Term, level: int, depth: int) -> List[str]:
        return self.stmt_lines(term, level + 1, depth + 1)

    def _inline_block(self, term: Term, level: int, depth: int) -> str:
        lines = [line for line in self._block(term, level, depth) if line]
        if self.multiline:
            return "\n" + "\n".join(lines) + "\n" + self._pad(level) if lines else " "
        return " " + "; ".join(line.strip() for line in lines) + " " if lines else " "

    def stmt_lines(self, term: Term, level: int, depth: int) -> List[str]:
        pad = self._pad(level)
        if self.max_depth is not None and depth > self.max_depth:
            return [pad + ELLIPSIS]
        if isinstance(term, Skip):
            return [pad + ";"] if self.trace else []
        if isinstance(term, Seq):
            lines: List[str] = []
            node: Term = term
            while isinstance(node, Seq):
                first = node.first
                if isinstance(first, Return) and not self.trace:
                    lines.append(pad + "do " + self._return(first, depth + 1) + " end")
                else:
                    lines.extend(self.stmt_lines(first, level, depth + 1))
                node = node.rest
            lines.extend(self.stmt_lines(node, level, depth + 1))
            return lines
        if isinstance(term, If):
            text = pad + "if " + self.expr(term.cond, depth + 1) + " then"
            text += self._inline_block(term.then, level, depth)
            if not isinstance(term.orelse, Skip) or self.trace:
                text += "else" + self._inline_block(term.orelse, level, depth)
            return [text + "end"]
        if isinstance(term, (While, Iter)):
            keyword = "while" if isinstance(term, While) else "$iter"
            return [pad + keyword + " " + self.expr(term.cond, depth + 1) + " do"
                    + self._inline_block(term.body, level, depth) + "end"]
        if isinstance(term, Break):
            return [pad + "break"]
        if isinstance(term, Local):
            decl = "local " + ", ".join(term.names)
            if term.exprs:
                decl += " = " + self.exprs(term.exprs, depth + 1)
            if self.trace:
                return [pad + decl + " in" + self._inline_block(term.body, level, depth) + "end"]
            body = self._block(term.body, level, depth)
            inner = [self._pad(level + 1) + decl] + body
            if self.multiline:
                return [pad + "do"] + inner + [pad + "end"]
            return [pad + "do " + "; ".join(line.strip() for line in inner if line) + " end"]
        if isinstance(term, Assign):
            return [pad + self.exprs(term.targets, depth + 1) + " = "
                    + self.exprs(term.exprs, depth + 1)]
        if isinstance(term, CallStat):
            call = self.expr(term.call, depth + 1)
            if self.multiline and call.startswith("("):
                call = ";" + call
            return [pad + call]
        if isinstance(term, Return):
            return [pad + self._return(term, depth)]
        if isinstance(term, LabeledStmt):
            inner = self._join(self.stmt_lines(term.body, 0, depth + 1), 0)
            return [pad + "(" + (inner or ";") + ")^" + term.label.value]
        return [pad + self.expr(term, depth)]

    def _return(self, term: Return, depth: int) -> str:
        if not term.exprs:
            return "return"
        return "return " + self.exprs(term.exprs, depth + 1)

    # Expressions

    def exprs(self, items, depth: int) -> str:
        return ", ".join(self.expr(item, depth) for item in items)

    def expr(self, term: Term, depth: int) -> str:
        if self.max_depth is not None and depth > self.max_depth:
            return ELLIPSIS
        if isinstance(term, Nil):
            return "nil"
        if isinstance(term, Boolean):
            return "true" if term.value else "false"
        if isinstance(term, Number):
            return format_number_literal(term.value)
        if isinstance(term, String):
            return format_string_literal(term.value)
        if isinstance(term, Name):
            return term.name
        if isinstance(term, Vararg):
            return "..."
        if isinstance(term, Ref):
            return f"$r{term.id}"
        if isinstance(term, ObjRef):
            return f"$objr{term.id}"
        if isinstance(term, FunctionDef):
            params = list(term.params) + (["..."] if term.is_vararg else [])
            head = f"function#{term.label}" if self.trace else "function"
            return (head + "(" + ", ".join(params) + ")"
                    + self._inline_block(term.body, 0, depth) + "end")
        if isinstance(term, Index):
            obj = self.expr(term.obj, depth + 1)
            if isinstance(term.key, String) and is_identifier(term.key.value):
                return obj + "." + term.key.value.decode("ascii")
            return obj + "[" + self.expr(term.key, depth + 1) + "]"
        if isinstance(term, Paren):
            return "(" + self.expr(term.expr, depth + 1) + ")"
        if isinstance(term, Call):
            return self.expr(term.fn, depth + 1) + "(" + self.exprs(term.args, depth + 1) + ")"
        if isinstance(term, MethodCall):
            return (self.expr(term.obj, depth + 1) + ":" + term.method
                    + "(" + self.exprs(term.args, depth + 1) + ")")
        if isinstance(term, BinOp):
            return (self.expr(term.left, depth + 1) + " " + term.op + " "
                    + self.expr(term.right, depth + 1))
        if isinstance(term, UnOp):
            operand = self.expr(term.operand, depth + 1)
            if term.op == "not":
                return "not " + operand
            if term.op == "-" and operand.startswith("-"):
                return "- " + operand
            return term.op + operand
        if isinstance(term, TableCons):
            fields = []
            for key, value in zip(term.keys, term.values):
                rendered = self.expr(value, depth + 1)
                if key is None:
                    fields.append(rendered)
                elif isinstance(key, String) and is_identifier(key.value):
                    fields.append(key.value.decode("ascii") + " = " + rendered)
                else:
                    fields.append("[" + self.expr(key, depth + 1) + "] = " + rendered)
            return "{" + ", ".join(fields) + "}"
        if isinstance(term, Tuple_):
            return "<" + self.exprs(term.items, depth + 1) + ">"
        if isinstance(term, BuiltIn):
            return "$builtIn " + term.name + "(" + self.exprs(term.args, depth + 1) + ")"
        if isinstance(term, LabeledExpr):
            inner = self.render_nested(term.body, depth + 1)
            return "(" + inner + ")^" + term.label.value
        if isinstance(term, ErrorValue):
            return "$err " + self.expr(term.value, depth + 1)
        return self._join(self.stmt_lines(term, 0, depth), 0)

    def render_nested(self, term: Term, depth: int) -> str:
        if isinstance(term, (Skip, Seq, If, While, Iter, Break, Local, Assign, CallStat,
                             Return, LabeledStmt)):
            saved, self.multiline = self.multiline, False
            try:
                return self._join(self.stmt_lines(term, 0, depth), 0) or ";"
            finally:
                self.multiline = saved
        return self.expr(term, depth)


def render_source(term: Term, multiline: bool = False) -> str:
    """Render a source term as Lua text the parser accepts (with run-time syntax enabled)."""
    return Renderer(trace=False, multiline=multiline).render(term)


def render_trace(term: Term, max_depth: Optional[int] = None) -> str:
    """Render any term, run-time constructs included, on one line."""
    return Renderer(trace=True, max_depth=max_depth).render(term)
