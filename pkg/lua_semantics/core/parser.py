"""
Parser for Lua 5.2 chunks.

Produces terms of the formalized core directly: free identifiers become
``_ENV["x"]``, local declarations are scoped over the rest of their block
(``local x = e in s end``), and the surface forms the core does not have
(numeric and generic ``for``, ``repeat``, ``~=``, ``local function``) are
desugared on the way.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Set, Tuple, Union

from lua_semantics.core.lexer import Lexer, ParseError, Token
from lua_semantics.core.terms import (
    BREAK, FALSE, NIL, SKIP, TRUE, VARARG, Assign, BinOp, BuiltIn, Call, CallStat, Expr,
    FunctionDef, If, Index, Local, MethodCall, Name, Number, Paren, Return, Seq, SourcePos,
    Stmt, String, TableCons, UnOp, Vararg, While, fresh_function_label,
)
from lua_semantics.utils.logging_utils import get_logger

__all__ = ["ParseError", "Parser", "parse_chunk", "parse_expression"]

ENV_NAME = "_ENV"

# (left, right) binding power, as in lparser.c
BINARY_PRIORITY: Dict[str, Tuple[int, int]] = {
    "+": (6, 6), "-": (6, 6),
    "*": (7, 7), "/": (7, 7), "%": (7, 7),
    "^": (10, 9),
    "..": (5, 4),
    "==": (3, 3), "~=": (3, 3), "<": (3, 3), "<=": (3, 3), ">": (3, 3), ">=": (3, 3),
    "and": (2, 2), "or": (1, 1),
}
UNARY_PRIORITY = 8
UNARY_OPERATORS = ("not", "-", "#")

BLOCK_FOLLOW = ("else", "elseif", "end", "until")


@dataclass
class _LocalDecl:
    """A local declaration still waiting for the rest of its block."""
    names: Tuple[str, ...]
    exprs: Tuple[Expr, ...]


@dataclass
class _FunctionState:
    is_vararg: bool
    loop_depth: int = 0


def build_block(items: List[Union[Stmt, _LocalDecl]]) -> Stmt:
    """Fold a statement list into right-nested sequences and local scopes."""
    result: Optional[Stmt] = None
    for item in reversed(items):
        if isinstance(item, _LocalDecl):
            result = Local(item.names, item.exprs, result if result is not None else SKIP)
        elif result is None:
            result = item
        else:
            result = Seq(item, result)
    return result if result is not None else SKIP


class Parser:
    """Recursive-descent parser producing core terms."""

    def __init__(self, source, chunk_name: str = "?", allow_runtime_syntax: bool = False):
        """
        Initialize the parser.

        Args:
            source: Chunk text (bytes or str)
            chunk_name: Name used in positions and error messages
            allow_runtime_syntax: Accept ``$builtIn`` calls and ``$`` identifiers
        """
        self.chunk_name = chunk_name
        self.allow_runtime_syntax = allow_runtime_syntax
        self.tokens: List[Token] = Lexer(source, chunk_name, allow_runtime_syntax).tokenize()
        self.index = 0
        self.scopes: List[Set[str]] = []
        self.functions: List[_FunctionState] = []
        self._positions: Dict[int, SourcePos] = {}
        self.logger = get_logger("core.parser")

    # Token helpers

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.index + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        token = self.tokens[self.index]
        if token.kind != "eof":
            self.index += 1
        return token

    def check(self, value: str) -> bool:
        token = self.current
        return token.kind in ("op", "keyword") and token.value == value

    def accept(self, value: str) -> bool:
        if self.check(value):
            self.advance()
            return True
        return False

    def error(self, message: str, token: Optional[Token] = None) -> ParseError:
        token = token or self.current
        return ParseError(f"{message} near {token.describe()}", token.line, token.column,
                          self.chunk_name)

    def expect(self, value: str) -> Token:
        if not self.check(value):
            raise self.error(f"'{value}' expected")
        return self.advance()

    def expect_match(self, what: str, who: str, line: int) -> None:
        if self.check(what):
            self.advance()
            return
        if line == self.current.line:
            raise self.error(f"'{what}' expected")
        raise self.error(f"'{what}' expected (to close '{who}' at line {line})")

    def expect_name(self) -> str:
        token = self.current
        if token.kind != "name":
            raise self.error("<name> expected")
        self.advance()
        return token.value  # type: ignore[return-value]

    def pos(self, token: Optional[Token] = None) -> SourcePos:
        line = (token or self.current).line
        position = self._positions.get(line)
        if position is None:
            position = self._positions[line] = SourcePos(self.chunk_name, line)
        return position

    # Scopes

    def declare(self, *names: str) -> None:
        self.scopes[-1].update(names)

    def resolve(self, name: str, token: Token) -> Expr:
        for scope in reversed(self.scopes):
            if name in scope:
                return Name(name)
        return Index(Name(ENV_NAME), String(name.encode("utf-8")), self.pos(token))

    # Entry points

    def parse_chunk(self) -> Stmt:
        """Parse a whole chunk; the main chunk is a vararg function."""
        self.functions.append(_FunctionState(is_vararg=True))
        self.scopes.append({ENV_NAME})
        body = self.block()
        if self.current.kind != "eof":
            raise self.error("'<eof>' expected")
        self.logger.debug(f"Parsed chunk {self.chunk_name} ({len(self.tokens)} tokens)")
        return body

    def parse_expression(self) -> Expr:
        """Parse a single expression followed by end of input."""
        self.functions.append(_FunctionState(is_vararg=False))
        self.scopes.append({ENV_NAME})
        expr = self.expr()
        if self.current.kind != "eof":
            raise self.error("'<eof>' expected")
        return expr

    # Blocks and statements

    def block_follows(self, with_until: bool = True) -> bool:
        token = self.current
        if token.kind == "eof":
            return True
        if token.kind == "keyword" and token.value in BLOCK_FOLLOW:
            return with_until or token.value != "until"
        return False

    def statements(self) -> List[Union[Stmt, _LocalDecl]]:
        items: List[Union[Stmt, _LocalDecl]] = []
        while not self.block_follows():
            if self.check("return"):
                items.append(self.return_stat())
                break
            items.extend(self.statement())
        return items

    def block(self, *declared: str) -> Stmt:
        self.scopes.append(set(declared))
        items = self.statements()
        self.scopes.pop()
        return build_block(items)

    def statement(self) -> List[Union[Stmt, _LocalDecl]]:
        token = self.current
        if token.kind == "op" and token.value == ";":
            self.advance()
            return []
        if token.kind == "op" and token.value == "::":
            raise self.error("labels are not supported")
        if token.kind == "keyword":
            keyword = token.value
            if keyword == "if":
                return [self.if_stat()]
            if keyword == "while":
                return [self.while_stat()]
            if keyword == "do":
                self.advance()
                body = self.block()
                self.expect_match("end", "do", token.line)
                return [body]
            if keyword == "for":
                return [self.for_stat()]
            if keyword == "repeat":
                return [self.repeat_stat()]
            if keyword == "function":
                return [self.function_stat()]
            if keyword == "local":
                self.advance()
                if self.accept("function"):
                    return self.local_function()
                return [self.local_stat()]
            if keyword == "break":
                self.advance()
                if self.functions[-1].loop_depth == 0:
                    raise ParseError(f"<break> at line {token.line} not inside a loop",
                                     token.line, token.column, self.chunk_name)
                return [BREAK]
            if keyword == "goto":
                raise self.error("goto statements are not supported")
        return [self.expr_stat()]

    def if_stat(self) -> Stmt:
        line = self.current.line
        branches: List[Tuple[Expr, Stmt]] = []
        self.advance()
        cond = self.expr()
        self.expect("then")
        branches.append((cond, self.block()))
        orelse: Stmt = SKIP
        while True:
            if self.accept("elseif"):
                cond = self.expr()
                self.expect("then")
                branches.append((cond, self.block()))
            elif self.accept("else"):
                orelse = self.block()
                self.expect_match("end", "if", line)
                break
            else:
                self.expect_match("end", "if", line)
                break
        for cond, then in reversed(branches):
            orelse = If(cond, then, orelse)
        return orelse

    def loop_body(self, *declared: str) -> Stmt:
        self.functions[-1].loop_depth += 1
        body = self.block(*declared)
        self.functions[-1].loop_depth -= 1
        return body

    def while_stat(self) -> Stmt:
        line = self.advance().line
        cond = self.expr()
        self.expect("do")
        body = self.loop_body()
        self.expect_match("end", "while", line)
        return While(cond, body)

    def repeat_stat(self) -> Stmt:
        # the condition sees the body's locals
        line = self.advance().line
        self.functions[-1].loop_depth += 1
        self.scopes.append(set())
        items = self.statements()
        self.expect_match("until", "repeat", line)
        cond = self.expr()
        self.scopes.pop()
        self.functions[-1].loop_depth -= 1
        items.append(If(cond, BREAK, SKIP))
        return While(TRUE, build_block(items))

    def for_stat(self) -> Stmt:
        for_token = self.advance()
        first = self.expect_name()
        if self.check("="):
            return self.numeric_for(for_token, first)
        if self.check(",") or self.check("in"):
            return self.generic_for(for_token, first)
        raise self.error("'=' or 'in' expected")

    def numeric_for(self, for_token: Token, name: str) -> Stmt:
        self.expect("=")
        start = self.expr()
        self.expect(",")
        limit = self.expr()
        step: Expr = Number(1.0)
        if self.accept(","):
            step = self.expr()
        self.expect("do")
        body = self.loop_body(name)
        self.expect_match("end", "for", for_token.line)

        pos = self.pos(for_token)
        var, lim, stp = Name("$var"), Name("$limit"), Name("$step")

        def checked(hidden: Name, what: str) -> Stmt:
            message = String((pos.prefix() + f"'for' {what} must be a number").encode("utf-8"))
            return If(UnOp("not", hidden, pos),
                      CallStat(BuiltIn("error", (message, Number(0.0)), pos)), SKIP)

        cond = BinOp("or",
                     BinOp("and", BinOp(">", stp, Number(0.0), pos), BinOp("<=", var, lim, pos), pos),
                     BinOp("and", BinOp("<=", stp, Number(0.0), pos), BinOp(">=", var, lim, pos), pos),
                     pos)
        loop = While(cond, Seq(Local((name,), (var,), body),
                               Assign((var,), (BinOp("+", var, stp, pos),))))
        checks = Seq(checked(var, "initial value"), Seq(checked(lim, "limit"),
                                                         Seq(checked(stp, "step"), loop)))
        return Local(("$var", "$limit", "$step"),
                     tuple(BuiltIn("tonumber", (_single(e),), pos) for e in (start, limit, step)),
                     checks)

    def generic_for(self, for_token: Token, first: str) -> Stmt:
        names = [first]
        while self.accept(","):
            names.append(self.expect_name())
        self.expect("in")
        exprs = self.expr_list()
        self.expect("do")
        body = self.loop_body(*names)
        self.expect_match("end", "for", for_token.line)

        pos = self.pos(for_token)
        fn, state, control = Name("$f"), Name("$s"), Name("$ctl")
        step = Seq(If(BinOp("==", Name(first), NIL, pos), BREAK, SKIP),
                   Seq(Assign((control,), (Name(first),)), body))
        inner = Local(tuple(names), (Call(fn, (state, control), pos),), step)
        return Local(("$f", "$s", "$ctl"), tuple(exprs), While(TRUE, inner))

    def function_stat(self) -> Stmt:
        token = self.advance()
        name_token = self.current
        name = self.expect_name()
        target = self.resolve(name, name_token)
        full_name = name
        is_method = False
        while self.check(".") or self.check(":"):
            is_method = self.advance().value == ":"
            key_token = self.current
            key = self.expect_name()
            full_name += (":" if is_method else ".") + key
            target = Index(target, String(key.encode("utf-8")), self.pos(key_token))
            if is_method:
                break
        function = self.function_body(token, is_method, full_name)
        return Assign((target,), (function,))

    def local_function(self) -> List[Union[Stmt, _LocalDecl]]:
        token = self.tokens[self.index - 1]
        name = self.expect_name()
        self.declare(name)
        function = self.function_body(token, False, name)
        return [_LocalDecl((name,), (NIL,)), Assign((Name(name),), (function,))]

    def local_stat(self) -> _LocalDecl:
        names = [self.expect_name()]
        while self.accept(","):
            names.append(self.expect_name())
        exprs: List[Expr] = []
        if self.accept("="):
            exprs = self.expr_list()
        self.declare(*names)
        return _LocalDecl(tuple(names), tuple(exprs))

    def return_stat(self) -> Stmt:
        self.advance()
        exprs: List[Expr] = []
        if not self.block_follows() and not self.check(";"):
            exprs = self.expr_list()
        self.accept(";")
        if not self.block_follows():
            raise self.error("'<eof>' expected" if self.current.kind != "eof" else "'end' expected")
        return Return(tuple(exprs))

    def expr_stat(self) -> Stmt:
        start = self.current
        expr = self.suffixed_expr()
        if self.check("=") or self.check(","):
            targets = [expr]
            while self.accept(","):
                targets.append(self.suffixed_expr())
            self.expect("=")
            exprs = self.expr_list()
            for target in targets:
                if not isinstance(target, (Name, Index)):
                    raise self.error("syntax error", start)
            return Assign(tuple(targets), tuple(exprs))
        if not isinstance(expr, (Call, MethodCall, BuiltIn)):
            raise self.error("syntax error")
        return CallStat(expr)

    # Expressions

    def expr_list(self) -> List[Expr]:
        exprs = [self.expr()]
        while self.accept(","):
            exprs.append(self.expr())
        return exprs

    def expr(self, limit: int = 0) -> Expr:
        token = self.current
        if token.kind in ("op", "keyword") and token.value in UNARY_OPERATORS:
            self.advance()
            operand = self.expr(UNARY_PRIORITY)
            left: Expr = UnOp(token.value, operand, self.pos(token))  # type: ignore[arg-type]
        else:
            left = self.simple_expr()
        while True:
            op_token = self.current
            op = op_token.value
            if op_token.kind not in ("op", "keyword") or op not in BINARY_PRIORITY:
                return left
            left_power, right_power = BINARY_PRIORITY[op]  # type: ignore[index]
            if left_power <= limit:
                return left
            self.advance()
            right = self.expr(right_power)
            pos = self.pos(op_token)
            if op == "~=":
                left = UnOp("not", Paren(BinOp("==", left, right, pos)), pos)
            else:
                left = BinOp(op, left, right, pos)  # type: ignore[arg-type]

    def simple_expr(self) -> Expr:
        token = self.current
        if token.kind == "number":
            self.advance()
            return Number(token.value)  # type: ignore[arg-type]
        if token.kind == "string":
            self.advance()
            return String(token.value)  # type: ignore[arg-type]
        if token.kind == "keyword":
            if token.value == "nil":
                self.advance()
                return NIL
            if token.value == "true":
                self.advance()
                return TRUE
            if token.value == "false":
                self.advance()
                return FALSE
            if token.value == "function":
                self.advance()
                return self.function_body(token, False, "")
        if token.kind == "op":
            if token.value == "...":
                if not self.functions[-1].is_vararg:
                    raise self.error("cannot use '...' outside a vararg function")
                self.advance()
                return VARARG
            if token.value == "{":
                return self.table_constructor()
        return self.suffixed_expr()

    def primary_expr(self) -> Expr:
        token = self.current
        if token.kind == "name":
            self.advance()
            return self.resolve(token.value, token)  # type: ignore[arg-type]
        if token.kind == "op" and token.value == "(":
            self.advance()
            inner = self.expr()
            self.expect_match(")", "(", token.line)
            return Paren(inner)
        if token.kind == "runtime":
            self.advance()
            name = self.expect_name()
            if self.accept("."):
                name += "." + self.expect_name()
            self.expect("(")
            args: List[Expr] = []
            if not self.check(")"):
                args = self.expr_list()
            self.expect_match(")", "(", token.line)
            return BuiltIn(name, tuple(args), self.pos(token))
        raise self.error("unexpected symbol")

    def suffixed_expr(self) -> Expr:
        expr = self.primary_expr()
        while True:
            token = self.current
            if token.kind == "op" and token.value == ".":
                self.advance()
                key = self.expect_name()
                expr = Index(expr, String(key.encode("utf-8")), self.pos(token))
            elif token.kind == "op" and token.value == "[":
                self.advance()
                key_expr = self.expr()
                self.expect("]")
                expr = Index(expr, key_expr, self.pos(token))
            elif token.kind == "op" and token.value == ":":
                self.advance()
                method = self.expect_name()
                expr = MethodCall(expr, method, tuple(self.call_args()), self.pos(token))
            elif (token.kind == "string"
                  or (token.kind == "op" and token.value in ("(", "{"))):
                expr = Call(expr, tuple(self.call_args()), self.pos(token))
            else:
                return expr

    def call_args(self) -> List[Expr]:
        token = self.current
        if token.kind == "string":
            self.advance()
            return [String(token.value)]  # type: ignore[arg-type]
        if token.kind == "op" and token.value == "{":
            return [self.table_constructor()]
        if token.kind == "op" and token.value == "(":
            self.advance()
            args: List[Expr] = []
            if not self.check(")"):
                args = self.expr_list()
            self.expect_match(")", "(", token.line)
            return args
        raise self.error("function arguments expected")

    def table_constructor(self) -> Expr:
        open_token = self.expect("{")
        keys: List[Optional[Expr]] = []
        values: List[Expr] = []
        while not self.check("}"):
            token = self.current
            if token.kind == "op" and token.value == "[":
                self.advance()
                key = self.expr()
                self.expect("]")
                self.expect("=")
                keys.append(key)
                values.append(self.expr())
            elif token.kind == "name" and self.peek().kind == "op" and self.peek().value == "=":
                self.advance()
                self.advance()
                keys.append(String(token.value.encode("utf-8")))  # type: ignore[union-attr]
                values.append(self.expr())
            else:
                keys.append(None)
                values.append(self.expr())
            if not (self.accept(",") or self.accept(";")):
                break
        self.expect_match("}", "{", open_token.line)
        return TableCons(tuple(keys), tuple(values), self.pos(open_token))

    def function_body(self, token: Token, is_method: bool, name: str) -> FunctionDef:
        label = fresh_function_label()
        params: List[str] = ["self"] if is_method else []
        is_vararg = False
        self.expect("(")
        if not self.check(")"):
            while True:
                if self.accept("..."):
                    is_vararg = True
                    break
                params.append(self.expect_name())
                if not self.accept(","):
                    break
        self.expect(")")
        self.functions.append(_FunctionState(is_vararg=is_vararg))
        body = self.block(*params)
        self.functions.pop()
        self.expect_match("end", "function", token.line)
        return FunctionDef(label, tuple(params), is_vararg, body, name)


def _single(expr: Expr) -> Expr:
    """Force a possibly multi-valued expression to exactly one value."""
    if isinstance(expr, (Call, MethodCall, Vararg)):
        return Paren(expr)
    return expr


def parse_chunk(source, chunk_name: str = "?", allow_runtime_syntax: bool = False) -> Stmt:
    """
    Parse a chunk into a core statement.

    Args:
        source: Chunk text (bytes or str)
        chunk_name: Name used in positions and error messages
        allow_runtime_syntax: Accept ``$builtIn`` calls and ``$`` identifiers

    Returns:
        The chunk body; its only free names are ``_ENV`` and possibly ``...``

    Raises:
        ParseError: If the chunk is not valid Lua 5.2 of the supported subset
    """
    return Parser(source, chunk_name, allow_runtime_syntax).parse_chunk()


def parse_expression(source, chunk_name: str = "?", allow_runtime_syntax: bool = False) -> Expr:
    """Parse a single expression; ``...`` is rejected at the top level."""
    return Parser(source, chunk_name, allow_runtime_syntax).parse_expression()
