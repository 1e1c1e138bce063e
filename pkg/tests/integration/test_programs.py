"""
Integration tests running whole programs through parser, machine and library.
"""

import pytest

from lua_semantics.core.machine import Completed, Errored, FuelExhausted, describe_error

from tests.conftest import ACCOUNT_PROGRAM, MEMSUM_PROGRAM


def completed_output(run_lua, source) -> str:
    output, outcome = run_lua(source)
    assert isinstance(outcome, Completed), outcome
    return output.decode("utf-8")


class TestExamplePrograms:
    """Programs exercising objects, recursion and identity."""

    def test_account(self, run_lua):
        """Test methods found through __index."""
        assert completed_output(run_lua, ACCOUNT_PROGRAM) == "5\n6\n"

    def test_recursive_sum(self, run_lua):
        """Test a recursive local function."""
        assert completed_output(run_lua, MEMSUM_PROGRAM) == "211\n"

    def test_function_identity(self, run_lua):
        """Test that functions from different definitions are different values."""
        source = "f = function() end\ng = function() end\nprint(f == g, f == f)"
        assert completed_output(run_lua, source) == "false\ttrue\n"

    def test_same_definition_same_upvalues(self, run_lua):
        """Test that one definition gives equal functions unless captured locals differ."""
        source = """
local function make() return function() return 1 end end
local function capture(x) return function() return x end end
local c = capture({})
print(make() == make(), capture({}) == capture({}), c == c)
"""
        assert completed_output(run_lua, source) == "true\tfalse\ttrue\n"

    def test_type_can_be_overridden(self, run_lua):
        """Test replacing a global library function."""
        source = """
local original = type
type = function(v) return "custom " .. original(v) end
print(type(1))
"""
        assert completed_output(run_lua, source) == "custom number\n"

    def test_closures_share_upvalues(self, run_lua):
        """Test counters closing over the same local."""
        source = """
local function counter()
  local n = 0
  return function() n = n + 1 return n end, function() return n end
end
local inc, get = counter()
inc() inc()
local inc2 = counter()
inc2()
print(get(), inc2())
"""
        assert completed_output(run_lua, source) == "2\t2\n"

    def test_varargs(self, run_lua):
        """Test passing and adjusting variable argument lists."""
        source = """
local function pack(...) return {n = select("#", ...), ...} end
local function first(a) return a end
local t = pack(1, nil, 3)
print(t.n, t[1], t[3], first(pack(4, 5)[2]))
print((select(2, "a", "b", "c")))
"""
        assert completed_output(run_lua, source) == "3\t1\t3\t5\nb\n"

    def test_multiple_assignment_evaluates_before_assigning(self, run_lua):
        """Test swapping through a multiple assignment."""
        source = "local a, b = 1, 2\na, b = b, a\nprint(a, b)"
        assert completed_output(run_lua, source) == "2\t1\n"

    def test_loops(self, run_lua):
        """Test numeric for with a step, repeat and break."""
        source = """
local s = 0
for i = 10, 1, -3 do s = s + i end
local n = 0
repeat n = n + 1 until n >= 4
while true do if n > 6 then break end n = n + 1 end
print(s, n)
"""
        assert completed_output(run_lua, source) == "22\t7\n"

    def test_for_loop_variable_is_a_copy(self, run_lua):
        """Test that changing the loop variable does not change the iteration."""
        source = "local c = 0\nfor i = 1, 3 do i = i * 10 c = c + 1 end\nprint(c)"
        assert completed_output(run_lua, source) == "3\n"

    def test_string_coercions(self, run_lua):
        """Test arithmetic on numeric strings and concatenation of numbers."""
        assert completed_output(run_lua, 'print("10" + 5, 1 .. 2, "3" * "4")') == "15\t12\t12\n"

    def test_uncaught_runtime_error(self, run_lua):
        """Test the message of an error raised by an operation."""
        _, outcome = run_lua("local t = {}\nprint(t.x.y)")
        assert isinstance(outcome, Errored)
        assert describe_error(outcome.value) == "input:2: attempt to index a nil value"

    def test_infinite_recursion_runs_out_of_fuel(self, run_lua):
        """Test that divergence ends with the step budget."""
        _, outcome = run_lua("local function f() return f() end\nf()", fuel=5_000)
        assert isinstance(outcome, FuelExhausted)
        assert outcome.steps == 5_000

    @pytest.mark.parametrize("chunk_name,prefix", [
        ("=input", "input:1:"),
        ("@script.lua", "script.lua:1:"),
        ("print(x.y)", '[string "print(x.y)"]:1:'),
    ])
    def test_chunk_names_in_messages(self, run_lua, chunk_name, prefix):
        """Test how chunk names appear in error positions."""
        _, outcome = run_lua("print(x.y)", chunk_name=chunk_name)
        assert describe_error(outcome.value).startswith(prefix)
