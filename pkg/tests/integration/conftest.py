"""
Fixtures for integration tests: a seeded generator of random Lua programs.
"""

import random
from typing import List, Tuple

import pytest

WORDS = ("a", "bc", "lua", "10", " 7 ", "")

# Statements that raise an error every time they run
FAULTS = (
    "local z = nil; z.x = 1",
    "local z = nil; print(z.x)",
    "local n = 3; n()",
    "print({} + 1)",
    "print(#nil)",
    'print(1 < "x")',
    'print("a" .. {})',
    'error("raised")',
    "error({})",
    "local t = setmetatable({}, {__index = function(t, k) return nil + 1 end}); print(t.x)",
)


class ProgramGenerator:
    """
    Random closed programs of the supported subset, reproducible from a seed.

    Variables are tracked with a kind (num, str, bool, table, function,
    counter, value) so that most operations get operands of the right type;
    loops always have a small fixed bound.
    """

    def __init__(self, seed: int, max_depth: int = 5):
        self.random = random.Random(seed)
        self.max_depth = max_depth
        self.counter = 0
        self.scopes: List[List[Tuple[str, str]]] = [[]]

    def fresh(self, prefix: str) -> str:
        self.counter += 1
        return f"{prefix}{self.counter}"

    def visible(self, *kinds: str) -> List[str]:
        return [name for scope in self.scopes for name, kind in scope if kind in kinds]

    def declare(self, name: str, kind: str) -> None:
        self.scopes[-1].append((name, kind))

    def chance(self, p: float) -> bool:
        return self.random.random() < p

    # Programs

    def program(self, max_statements: int = 4) -> str:
        count = self.random.randint(1, max_statements)
        return "\n".join(self.statement(1) for _ in range(count))

    def faulty_body(self) -> str:
        """A block followed by a statement that always raises an error."""
        self.scopes.append([])
        body = self.block(2)
        self.scopes.pop()
        return f"{body} {self.random.choice(FAULTS)}"

    def block(self, depth: int) -> str:
        self.scopes.append([])
        body = " ".join(self.statement(depth) for _ in range(self.random.randint(1, 2)))
        self.scopes.pop()
        return body

    # Statements

    def statement(self, depth: int) -> str:
        choices = ["local", "local", "print"]
        if self.visible("num"):
            choices.append("assign")
        if self.visible("table"):
            choices.append("field")
        if depth < self.max_depth:
            choices += ["if", "while", "for", "do", "function", "pcall"]
            if self.visible("table"):
                choices.append("pairs")
        return getattr(self, f"stat_{self.random.choice(choices)}")(depth)

    def stat_local(self, depth: int) -> str:
        kind = self.random.choice(("num", "num", "str", "bool", "table"))
        value = self.expr(kind, depth)
        name = self.fresh(kind[0])
        self.declare(name, kind)
        return f"local {name} = {value}"

    def stat_assign(self, depth: int) -> str:
        return f"{self.random.choice(self.visible('num'))} = {self.expr('num', depth)}"

    def stat_field(self, depth: int) -> str:
        table = self.random.choice(self.visible("table"))
        if self.chance(0.5):
            return f"{table}.k = {self.expr('any', depth)}"
        return f"{table}[{self.random.randint(1, 3)}] = {self.expr('any', depth)}"

    def stat_print(self, depth: int) -> str:
        return f"print({self.expr('any', depth)}, {self.expr('any', depth)})"

    def stat_if(self, depth: int) -> str:
        cond = self.expr("bool", depth)
        return f"if {cond} then {self.block(depth + 1)} else {self.block(depth + 1)} end"

    def stat_while(self, depth: int) -> str:
        name = self.fresh("c")
        bound = self.random.randint(0, 3)
        self.declare(name, "counter")
        body = self.block(depth + 1)
        return f"local {name} = 0 while {name} < {bound} do {name} = {name} + 1 {body} end"

    def stat_for(self, depth: int) -> str:
        name = self.fresh("i")
        self.scopes.append([(name, "counter")])
        body = self.block(depth + 1)
        self.scopes.pop()
        return f"for {name} = 1, {self.random.randint(0, 3)} do {body} end"

    def stat_pairs(self, depth: int) -> str:
        table = self.random.choice(self.visible("table"))
        key, value = self.fresh("k"), self.fresh("v")
        self.scopes.append([(key, "value"), (value, "value")])
        body = self.block(depth + 1)
        self.scopes.pop()
        return f"for {key}, {value} in pairs({table}) do {body} end"

    def stat_do(self, depth: int) -> str:
        return f"do {self.block(depth + 1)} end"

    def stat_function(self, depth: int) -> str:
        name, a, b = self.fresh("f"), self.fresh("a"), self.fresh("b")
        self.scopes.append([(a, "num"), (b, "num")])
        body = self.block(depth + 1)
        result = self.expr("num", depth + 1)
        self.scopes.pop()
        self.declare(name, "function")
        return f"local function {name}({a}, {b}) {body} return {result} end"

    def stat_pcall(self, depth: int) -> str:
        return f"print((pcall(function() {self.block(depth + 1)} end)))"

    # Expressions

    def expr(self, kind: str, depth: int) -> str:
        if kind == "any":
            if self.visible("value") and self.chance(0.2):
                return self.random.choice(self.visible("value"))
            kind = self.random.choice(("num", "str", "bool", "table", "nil", "field"))
        if kind == "nil":
            return "nil"
        if kind == "field":
            return f"({self.expr('table', depth + 1)}).k"
        leaf = depth >= self.max_depth or self.chance(0.4)
        return getattr(self, f"{kind}_{'leaf' if leaf else 'node'}")(depth + 1)

    def num_leaf(self, depth: int) -> str:
        names = self.visible("num", "counter")
        if names and self.chance(0.5):
            return self.random.choice(names)
        return str(self.random.randint(0, 9))

    def num_node(self, depth: int) -> str:
        n = lambda: self.expr("num", depth)
        options = [
            lambda: f"({n()} {self.random.choice(('+', '-', '*', '/', '%', '^'))} {n()})",
            lambda: f"(-{n()})",
            lambda: f"(#{self.expr('str', depth)})",
            lambda: f"(#{self.expr('table', depth)})",
            lambda: f"select('#', {self.expr('any', depth)}, {self.expr('any', depth)})",
            lambda: f"math.max({n()}, {n()})",
            lambda: f"(tonumber({self.expr('str', depth)}) or 0)",
            lambda: f"(setmetatable({{}}, {{__add = function(x, y) return 2 end}}) + {n()})",
        ]
        functions = self.visible("function")
        if functions:
            options.append(lambda: f"{self.random.choice(functions)}({n()}, {n()})")
        return self.random.choice(options)()

    def str_leaf(self, depth: int) -> str:
        names = self.visible("str")
        if names and self.chance(0.5):
            return self.random.choice(names)
        return f'"{self.random.choice(WORDS)}"'

    def str_node(self, depth: int) -> str:
        s = lambda: self.expr(self.random.choice(("str", "num")), depth)
        options = [
            lambda: f"({s()} .. {s()})",
            lambda: f"tostring({self.expr('any', depth)})",
            lambda: f"type({self.expr('any', depth)})",
            lambda: f"({self.expr('str', depth)}):upper()",
            lambda: f"string.rep({self.expr('str', depth)}, 2)",
            lambda: f"string.sub({self.expr('str', depth)}, 2)",
        ]
        return self.random.choice(options)()

    def bool_leaf(self, depth: int) -> str:
        names = self.visible("bool")
        if names and self.chance(0.5):
            return self.random.choice(names)
        return self.random.choice(("true", "false"))

    def bool_node(self, depth: int) -> str:
        n = lambda: self.expr("num", depth)
        b = lambda: self.expr("bool", depth)
        options = [
            lambda: f"({n()} {self.random.choice(('<', '<=', '>', '>=', '==', '~='))} {n()})",
            lambda: f"({self.expr('str', depth)} < {self.expr('str', depth)})",
            lambda: f"(not {self.expr('any', depth)})",
            lambda: f"({self.expr('any', depth)} == {self.expr('any', depth)})",
            lambda: f"({b()} {self.random.choice(('and', 'or'))} {b()})",
            lambda: f"({self.expr('any', depth)} ~= nil)",
        ]
        return self.random.choice(options)()

    def table_leaf(self, depth: int) -> str:
        names = self.visible("table")
        if names and self.chance(0.5):
            return self.random.choice(names)
        return "{}"

    def table_node(self, depth: int) -> str:
        options = [
            lambda: "{" + f"{self.expr('any', depth)}, {self.expr('any', depth)}" + "}",
            lambda: "{" + f"k = {self.expr('any', depth)}, {self.expr('num', depth)}" + "}",
            lambda: "setmetatable({}, {__index = function(t, key) return 1 end})",
        ]
        return self.random.choice(options)()


@pytest.fixture
def program_generator():
    """Factory for seeded program generators."""
    def create(seed: int, max_depth: int = 5) -> ProgramGenerator:
        return ProgramGenerator(seed, max_depth)
    return create
