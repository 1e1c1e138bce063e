"""
Unit tests for the library services.

Most services are exercised through small programs, since the wrappers
around them are ordinary Lua functions.
"""

import pytest

from lua_semantics.core.library import (
    REGISTRY, WRITES, Host, bootstrap_env, call_service, where,
)
from lua_semantics.core.machine import Completed, Errored, describe_error
from lua_semantics.core.store import new_stores
from lua_semantics.core.terms import (
    NIL, ErrorValue, LabeledExpr, Label, Number, ObjRef, SourcePos, String, Tuple_,
)


def completed_output(run_lua, source: str) -> str:
    output, outcome = run_lua(source)
    assert isinstance(outcome, Completed), outcome
    return output.decode("utf-8")


class TestServices:
    """Test cases for services called directly."""

    def test_where(self):
        """Test position prefixes of error messages."""
        assert where(None) == ""
        assert where(SourcePos("=[library]", 3)) == ""
        assert where(SourcePos("@f.lua", 2)) == "f.lua:2: "
        assert where(SourcePos("=input", 1)) == "input:1: "

    def test_service_error_becomes_error_value(self):
        """Test that a bad argument is a Lua error, not a Python exception."""
        result = call_service("math.floor", [String("x")], None)
        assert result == ErrorValue(String("bad argument #1 to 'floor' (number expected, got string)"))

    def test_select(self):
        """Test select with counts, positive and negative indices."""
        assert call_service("select", [String("#"), Number(1), NIL], None) == Number(2)
        assert call_service("select", [Number(2), Number(7), Number(8)], None) == Tuple_((Number(8),))
        assert call_service("select", [Number(-1), Number(7), Number(8)], None) == Tuple_((Number(8),))
        assert isinstance(call_service("select", [Number(0)], None), ErrorValue)

    def test_pcall_answers_with_protected_call(self):
        """Test that pcall hands the call to protected mode."""
        result = call_service("pcall", [Number(1), Number(2)], None)
        assert isinstance(result, LabeledExpr)
        assert result.label is Label.PROT_MD

    def test_print_writes_through_host(self):
        """Test that output goes to the host."""
        host = Host()
        call_service("$print", [String("a"), String("b")], None, host)
        assert host.getvalue() == b"a\tb\n"

    def test_error_levels(self):
        """Test that the level chooses the enclosing call site."""
        host = Host()
        host.call_sites = [SourcePos("=input", 5), SourcePos("=input", 9)]
        assert call_service("error", [String("m")], None, host) == ErrorValue(String("input:5: m"))
        assert call_service("error", [String("m"), Number(2)], None, host) == ErrorValue(String("input:9: m"))
        assert call_service("error", [String("m"), Number(0)], None, host) == ErrorValue(String("m"))
        assert call_service("error", [String("m"), Number(3)], None, host) == ErrorValue(String("m"))
        assert call_service("error", [Number(4)], None, host) == ErrorValue(Number(4))

    def test_handler_results(self):
        """Test the services that check what pairs and tostring handlers returned."""
        assert call_service("$pairs", [Number(1)], None) == Tuple_((Number(1), NIL, NIL))
        assert call_service("$tostring", [Number(2)], None) == String("2")
        assert call_service("$tostring", [NIL], None) == ErrorValue(String("'__tostring' must return a string"))

    def test_writing_services_are_marked(self):
        """Test that services changing tables are registered as such."""
        for name in ("rawset", "setmetatable", "table.insert", "table.remove", "table.pack"):
            assert REGISTRY[name].category == WRITES

    def test_bootstrap(self):
        """Test the initial environment."""
        sigma, theta, env_ref = bootstrap_env(*new_stores())
        globals_ref = sigma.read(env_ref)
        assert isinstance(globals_ref, ObjRef)
        assert theta.rawget(globals_ref, String("_G")) == globals_ref
        assert theta.rawget(globals_ref, String("_VERSION")) == String("Lua 5.2")
        math_ref = theta.rawget(globals_ref, String("math"))
        assert theta.rawget(math_ref, String("huge")) == Number(float("inf"))


class TestBasicFunctions:
    """Test cases for the basic library, run as programs."""

    @pytest.mark.parametrize("source,expected", [
        ('print(1, "a", nil, true)', "1\ta\tnil\ttrue\n"),
        ("print()", "\n"),
        ('print(select("#", 1, nil, 3))', "3\n"),
        ('print(select(2, "a", "b", "c"))', "b\tc\n"),
        ('print(select(-1, "a", "b"))', "b\n"),
        ('print(tonumber("0x10"), tonumber("  5  "), tonumber("z", 36), tonumber("abc"), tonumber("ff", 16))',
         "16\t5\t35\tnil\t255\n"),
        ("print(tostring(12), tostring(true), tostring(nil))", "12\ttrue\tnil\n"),
        ("print(type(print), type(nil), type({}), type('s'), type(2))",
         "function\tnil\ttable\tstring\tnumber\n"),
        ("print(rawequal(1, 1), rawequal({}, {}))", "true\tfalse\n"),
        ("print(rawlen({1, 2, 3}), rawlen('abcd'))", "3\t4\n"),
        ("print(unpack({1, 2, 3}))", "1\t2\t3\n"),
        ("print(next({}))", "nil\n"),
        ("print(_VERSION, _G._G == _G)", "Lua 5.2\ttrue\n"),
        ("print(assert(1, 'x'))", "1\tx\n"),
        ('print(pcall(assert, false, "msg"))', "false\tmsg\n"),
        ("print(pcall(assert, nil))", "false\tassertion failed!\n"),
        ('print(pcall(error, "x"))', "false\tx\n"),
        ("print(pcall(function() return 1, 2 end))", "true\t1\t2\n"),
        ("print(pcall(pairs, nil))", "false\tbad argument #1 to 'pairs' (table expected, got nil)\n"),
        ('print(pcall(math.floor, "x"))', "false\tbad argument #1 to 'floor' (number expected, got string)\n"),
        ("print(pcall(setmetatable, 1, {}))",
         "false\tbad argument #1 to 'setmetatable' (table expected, got number)\n"),
        ("for i, v in ipairs({10, 20, nil, 40}) do print(i, v) end", "1\t10\n2\t20\n"),
    ])
    def test_programs(self, run_lua, source, expected):
        """Test each basic function through a one-line program."""
        assert completed_output(run_lua, source) == expected

    def test_error_object_in_pcall(self, run_lua):
        """Test that any value can be an error object."""
        source = "local ok, e = pcall(function() error({code = 7}) end)\nprint(ok, e.code)"
        assert completed_output(run_lua, source) == "false\t7\n"

    def test_runtime_error_in_pcall(self, run_lua):
        """Test that run-time errors carry the position of the failing operation."""
        source = "local ok, e = pcall(function() local t = nil; return t.x end)\nprint(ok, e)"
        assert completed_output(run_lua, source) == "false\tinput:1: attempt to index a nil value\n"

    def test_raw_access_bypasses_metatables(self, run_lua):
        """Test rawget and rawset next to __index."""
        source = """
local t = setmetatable({}, {__index = function() return "meta" end})
print(t.x, rawget(t, "x"))
rawset(t, "x", 1)
print(t.x)
"""
        assert completed_output(run_lua, source) == "meta\tnil\n1\n"

    def test_protected_metatable(self, run_lua):
        """Test __metatable hiding and locking a metatable."""
        source = """
local t = setmetatable({}, {__metatable = "locked"})
print(getmetatable(t))
print(pcall(setmetatable, t, {}))
print(getmetatable("abc").__index == string)
"""
        assert completed_output(run_lua, source) == (
            "locked\nfalse\tcannot change a protected metatable\ntrue\n")

    def test_tostring_metamethod(self, run_lua):
        """Test that print honours __tostring."""
        source = 'print(setmetatable({}, {__tostring = function() return "obj" end}))'
        assert completed_output(run_lua, source) == "obj\n"

    def test_tostring_metamethod_result(self, run_lua):
        """Test that __tostring must give a string, with numbers converted."""
        source = 'print(tostring(setmetatable({}, {__tostring = function() return 42 end})))'
        assert completed_output(run_lua, source) == "42\n"

        _, outcome = run_lua('print(setmetatable({}, {__tostring = function() return {} end}))')
        assert isinstance(outcome, Errored)
        assert "'__tostring' must return a string" in describe_error(outcome.value)

    def test_pairs_metamethod_results(self, run_lua):
        """Test that pairs keeps exactly three results of __pairs."""
        source = """
local t = setmetatable({}, {__pairs = function(t) return next, {a = 1}, nil, "extra" end})
for k, v in pairs(t) do print(k, v) end
print(select("#", pairs(t)), select("#", pairs(setmetatable({}, {__pairs = function() end}))))
"""
        assert completed_output(run_lua, source) == "a\t1\n3\t3\n"

    def test_library_ignores_rebound_globals(self, run_lua):
        """Test that print keeps using the original tostring."""
        source = 'tostring = function() return "hacked" end\nprint(1)'
        assert completed_output(run_lua, source) == "1\n"

    def test_error_level_two(self, run_lua):
        """Test blaming the caller of the function that raised the error."""
        source = 'local function check(x) if not x then error("bad input", 2) end end\ncheck(false)'
        _, outcome = run_lua(source)
        assert isinstance(outcome, Errored)
        assert describe_error(outcome.value) == "input:2: bad input"


class TestLoad:
    """Test cases for load and string.dump."""

    def test_load_text(self, run_lua):
        """Test that a loaded chunk is a vararg function."""
        assert completed_output(run_lua, 'local f = load("return 1 + ...")\nprint(f(41))') == "42\n"

    def test_load_syntax_error(self, run_lua):
        """Test that a syntax error is returned, not raised."""
        expected = "nil\t(load):1: unexpected symbol near <eof>\n"
        assert completed_output(run_lua, 'print(load("x = "))') == expected

    def test_load_with_environment(self, run_lua):
        """Test that the fourth argument becomes the chunk's _ENV."""
        source = 'local env = {y = 5}\nlocal f = load("return y", "chunk", "t", env)\nprint(f())'
        assert completed_output(run_lua, source) == "5\n"

    def test_load_mode(self, run_lua):
        """Test that the mode restricts text chunks."""
        expected = "nil\tattempt to load a text chunk (mode is 'b')\n"
        assert completed_output(run_lua, 'print(load("return 1", "c", "b"))') == expected

    def test_load_reader_function(self, run_lua):
        """Test loading from a function returning pieces."""
        source = """
local parts = {"return ", "7"}
local i = 0
local f = load(function() i = i + 1 return parts[i] end)
print(f())
"""
        assert completed_output(run_lua, source) == "7\n"

    def test_dump_rejects_upvalues(self, run_lua):
        """Test that closures over locals cannot be dumped."""
        source = "local n = 1\nlocal function f() return n end\nprint(pcall(string.dump, f))"
        assert completed_output(run_lua, source) == "false\tunable to dump given function\n"

    @pytest.mark.parametrize("function,args,expected", [
        ("function(a, b) return a + b end", "(2, 3)", "5"),
        ("function(...) return select('#', ...) end", "(1, 2, 3)", "3"),
        ("function(s) return s:upper() end", "('abc')", "ABC"),
        ("function(n) local r = 1 for i = 2, n do r = r * i end return r end", "(5)", "120"),
        ("function(t) local s = 0 for _, v in ipairs(t) do s = s + v end return s end", "({1, 2, 3})", "6"),
        ("function(x) if x > 0 then return 'pos' elseif x < 0 then return 'neg' else return 'zero' end end",
         "(-3)", "neg"),
        ("function() local t = {} t.x = 1 t['y'] = 2 return t.x + t.y end", "()", "3"),
        ("function(a) return a ~= nil end", "(false)", "true"),
        ("function(n) local i = 0 repeat i = i + 1 until i >= n return i end", "(4)", "4"),
        ("function(n) local i, s = 0, 0 while i < n do i = i + 1 if i == 3 then break end s = s + i end "
         "return s end", "(10)", "3"),
        ("function(s) return #s, s .. '!' end", "('hey')", "3\they!"),
        ("function() return 'x' .. \"y\" end", "()", "xy"),
        ("function(f, x) return f(f(x)) end", "(function(v) return v * 2 end, 3)", "12"),
        ("function(...) local a, b = ... return b, a end", "(1, 2)", "2\t1"),
        ("function(t) return #t end", "({1, 2, 3, 4})", "4"),
        ("function(a, b) return math.max(a, b), math.min(a, b) end", "(3, 9)", "9\t3"),
        ("function() return 2 ^ 10, 7 % 3, -2 ^ 2 end", "()", "1024\t1\t-4"),
        ("function() return not nil, not 0 end", "()", "true\tfalse"),
        ("function(t) local n = 0 for k in pairs(t) do n = n + 1 end return n end",
         "({a = 1, b = 2, 3})", "3"),
        ("function() return 1 < 2 and 'lt' or 'ge' end", "()", "lt"),
    ])
    def test_dump_and_load(self, run_lua, function, args, expected):
        """Test that a dumped function behaves like the original once loaded."""
        source = f"local original = {function}\nlocal copy = load(string.dump(original))\nprint(copy{args})"
        assert completed_output(run_lua, source) == expected + "\n"


class TestStringLibrary:
    """Test cases for the string library."""

    @pytest.mark.parametrize("source,expected", [
        ('print(("abc"):upper(), string.lower("ABC"))', "ABC\tabc\n"),
        ('print(string.rep("ab", 3, "-"), string.rep("x", 0))', "ab-ab-ab\t\n"),
        ('print(string.sub("hello", 2, -2), ("hello"):sub(-3))', "ell\tllo\n"),
        ('print(("x"):byte(), string.byte("abc", 1, 3))', "120\t97\t98\t99\n"),
        ("print(string.char(72, 105), #string.reverse('abc'), string.len('four'))", "Hi\t3\t4\n"),
        ('local s = "word" print(s:len(), #s)', "4\t4\n"),
    ])
    def test_programs(self, run_lua, source, expected):
        """Test string functions and method syntax on strings."""
        assert completed_output(run_lua, source) == expected


class TestMathLibrary:
    """Test cases for the math library."""

    @pytest.mark.parametrize("source,expected", [
        ("print(math.floor(3.7), math.ceil(3.2), math.max(1, 5, 3), math.min(2, -1))", "3\t4\t5\t-1\n"),
        ("print(math.abs(-4), math.fmod(7, 3), math.sqrt(16))", "4\t1\t4\n"),
        ("print(math.modf(3.5))", "3\t0.5\n"),
        ("print(math.huge, -math.huge, math.pi)", "inf\t-inf\t3.1415926535898\n"),
        ("print(math.log(8, 2), math.exp(0))", "3\t1\n"),
    ])
    def test_programs(self, run_lua, source, expected):
        """Test math functions and constants."""
        assert completed_output(run_lua, source) == expected


class TestTableLibrary:
    """Test cases for the table library."""

    def test_insert_remove_concat(self, run_lua):
        """Test list manipulation."""
        source = """
local t = {}
table.insert(t, "a")
table.insert(t, "c")
table.insert(t, 2, "b")
print(table.concat(t, ","))
print(table.remove(t), table.concat(t, ","))
"""
        assert completed_output(run_lua, source) == "a,b,c\nc\ta,b\n"

    def test_pack_unpack(self, run_lua):
        """Test packing with a count and unpacking a range."""
        source = "local p = table.pack(1, nil, 3)\nprint(p.n, table.unpack({1, 2, 3}, 2))"
        assert completed_output(run_lua, source) == "3\t2\t3\n"

    def test_sort(self, run_lua):
        """Test sorting with the default order and with a comparator."""
        source = """
local s = {5, 2, 8, 1}
table.sort(s)
print(table.concat(s, " "))
table.sort(s, function(a, b) return a > b end)
print(table.concat(s, " "))
"""
        assert completed_output(run_lua, source) == "1 2 5 8\n8 5 2 1\n"

    def test_sort_is_stable(self, run_lua):
        """Test that equal elements keep their order."""
        source = """
local s = {{k = 2, v = "a"}, {k = 1, v = "b"}, {k = 2, v = "c"}, {k = 1, v = "d"}}
table.sort(s, function(x, y) return x.k < y.k end)
local out = {}
for i, e in ipairs(s) do out[i] = e.v end
print(table.concat(out))
"""
        assert completed_output(run_lua, source) == "bdac\n"

    def test_concat_rejects_tables(self, run_lua):
        """Test the error for a non-string element."""
        source = "print(pcall(table.concat, {1, {}, 3}))"
        expected = "false\tinvalid value (at index 2) in table for 'concat'\n"
        assert completed_output(run_lua, source) == expected
