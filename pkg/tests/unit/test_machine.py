"""
Unit tests for the reduction machine.
"""

import pytest

from lua_semantics.core.decompose import decompose
from lua_semantics.core.lexer import ParseError
from lua_semantics.core.machine import (
    RELATIONS, Completed, Configuration, Errored, FuelExhausted, Machine, Stuck, TraceStep,
    Transition, applicable_rules, describe_error, inject, load_program, run, step, trace,
)
from lua_semantics.core.parser import parse_chunk
from lua_semantics.core.store import new_stores
from lua_semantics.core.terms import (
    NIL, SKIP, TRUE, If, Index, Number, ObjRef, Ref, String, free_names,
)


class TestInject:
    """Test cases for building initial configurations."""

    def test_environment_is_bound(self):
        """Test that _ENV is replaced by a reference to the global table."""
        config = inject(parse_chunk(b"x = 1"))
        assert free_names(config.term) == set()
        target = config.term.targets[0]
        assert isinstance(target, Index)
        assert isinstance(target.obj, Ref)
        assert config.sigma.read(target.obj) == config.theta.registry["globals"]

    def test_load_program_rejects_bad_syntax(self):
        """Test that parse errors reach the caller."""
        with pytest.raises(ParseError):
            load_program(b"x = = 1", "=input")


class TestStep:
    """Test cases for single reductions."""

    def test_transition_carries_rule(self):
        """Test that a step names the rule it used."""
        result = step(Configuration(*new_stores(), If(TRUE, SKIP, SKIP)))
        assert isinstance(result, Transition)
        assert result.rule_id == "if/then"
        assert result.configuration.term == SKIP

    def test_final_configuration(self):
        """Test that stepping a final term reports the outcome."""
        assert isinstance(step(Configuration(*new_stores(), SKIP)), Completed)

    def test_dangling_reference_is_stuck(self):
        """Test that an engine fault becomes a Stuck outcome."""
        result = step(Configuration(*new_stores(), Ref(999)))
        assert isinstance(result, Stuck)
        assert result.diagnostic

    def test_applicable_rules(self):
        """Test that exactly one rule matches a redex."""
        sigma, theta = new_stores()
        split = decompose(If(TRUE, SKIP, SKIP))
        assert applicable_rules(split.context, split.redex, sigma, theta) == ["if/then"]

    def test_applicable_rules_leave_stores_alone(self):
        """Test that rules are tried on copies of the stores."""
        config = inject(parse_chunk(b"local t = {}"))
        sigma, theta = config.sigma, config.theta
        before = (len(sigma), len(theta))
        split = decompose(config.term)
        applicable_rules(split.context, split.redex, sigma, theta)
        assert (len(sigma), len(theta)) == before

    def test_relation_order(self):
        """Test the order in which relations are tried."""
        assert [name for name, _ in RELATIONS] == [
            "top-level", "protected", "stateless-stmt", "stateless-expr",
            "stateful", "funcall", "builtin", "metatable",
        ]


class TestRun:
    """Test cases for running to an outcome."""

    def test_completed(self):
        """Test a program that finishes."""
        outcome = run(load_program(b"local x = 1 + 2"))
        assert isinstance(outcome, Completed)
        assert outcome.result == SKIP
        assert outcome.steps > 0

    def test_errored(self):
        """Test an uncaught error."""
        outcome = run(load_program(b'error("x")', "=input"))
        assert isinstance(outcome, Errored)
        assert outcome.value == String("input:1: x")

    def test_fuel_exhausted(self):
        """Test that a loop stops after the given number of steps."""
        outcome = run(load_program(b"while true do end"), fuel=10)
        assert isinstance(outcome, FuelExhausted)
        assert outcome.steps == 10

    def test_zero_fuel(self):
        """Test that no reduction is made with no fuel."""
        config = load_program(b"local x = 1")
        outcome = run(config, fuel=0)
        assert isinstance(outcome, FuelExhausted)
        assert outcome.steps == 0
        assert outcome.configuration.term == config.term

    def test_stuck(self):
        """Test that running into a missing rule stops the run."""
        outcome = run(Configuration(*new_stores(), Ref(1)))
        assert isinstance(outcome, Stuck)
        assert outcome.steps == 0

    def test_returned_values_at_top_level(self):
        """Test that a top-level return ends the chunk."""
        outcome = run(load_program(b"do return 1 end print(2)"))
        assert isinstance(outcome, Completed)


class TestTrace:
    """Test cases for step-by-step traces."""

    def test_loop_that_never_runs(self):
        """Test the rules used by a loop whose condition is false."""
        events = list(trace(load_program(b"while false do ; end")))
        steps, outcome = events[:-1], events[-1]

        assert [s.rule_id for s in steps] == ["while/wrap", "iter/unfold", "if/else", "break/skip"]
        assert [s.index for s in steps] == [1, 2, 3, 4]
        assert isinstance(outcome, Completed)
        assert outcome.steps == 4

    def test_touched_entries(self):
        """Test that allocations are reported with the step that made them."""
        events = list(trace(load_program(b"local x = 1")))
        allocation = next(s for s in events if isinstance(s, TraceStep) and s.rule_id == "local/alloc")
        assert allocation.touched_values == (2,)

        events = list(trace(load_program(b"local t = {}")))
        construction = next(s for s in events if isinstance(s, TraceStep) and s.rule_id == "table/construct")
        assert len(construction.touched_objects) == 1

    def test_trace_ends_on_fuel(self):
        """Test that a trace yields exactly one outcome when fuel runs out."""
        events = list(trace(load_program(b"while true do end"), fuel=3))
        assert len(events) == 4
        assert isinstance(events[-1], FuelExhausted)


class TestDescribeError:
    """Test cases for error object descriptions."""

    @pytest.mark.parametrize("value,expected", [
        (String("boom"), "boom"),
        (Number(3), "3"),
        (NIL, "(error object is a nil value)"),
        (ObjRef(1), "(error object is a table value)"),
        (TRUE, "(error object is a boolean value)"),
    ])
    def test_describe(self, value, expected):
        """Test the message for each kind of error object."""
        assert describe_error(value) == expected


class TestMachine:
    """Test cases for the Machine facade."""

    def test_output_is_collected(self):
        """Test that printed text is kept by the machine."""
        machine = Machine()
        outcome = machine.run_source(b'print("hi")', "=input")
        assert isinstance(outcome, Completed)
        assert machine.output == b"hi\n"

    def test_output_sink(self):
        """Test that output can be sent elsewhere."""
        chunks = []
        machine = Machine(output=chunks.append)
        machine.run_source(b"print(1) print(2)")
        assert chunks == [b"1\n", b"2\n"]

    def test_fuel(self):
        """Test the machine's step budget."""
        outcome = Machine(fuel=50).run_source(b"while true do end")
        assert isinstance(outcome, FuelExhausted)
        assert outcome.steps == 50

    def test_trace(self):
        """Test tracing through the machine."""
        machine = Machine()
        events = list(machine.trace(machine.load(b"print(1)")))
        assert isinstance(events[-1], Completed)
        assert all(isinstance(e, TraceStep) for e in events[:-1])
        assert machine.output == b"1\n"
