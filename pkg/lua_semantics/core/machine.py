"""
The top-level reduction machine.

A configuration is the pair of stores and the program term. One step
decomposes the term, rewrites the redex with the first relation that
matches, and plugs the result back. Error propagation and protected mode
are handled here, since they need to see the whole context.
"""

import sys
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Tuple, Union

from lua_semantics.core.decompose import (
    Answer, EvaluationContext, decompose, label_focus, unconsumed_control_focus,
)
from lua_semantics.core.delta import tostring_primitive
from lua_semantics.core.library import Host, NullHost, bootstrap_env
from lua_semantics.core.metatable import step_metatable
from lua_semantics.core.parser import parse_chunk
from lua_semantics.core.relations import (
    StepResult, step_builtin, step_funcall, step_stateful, step_stateless_expr,
    step_stateless_stmt,
)
from lua_semantics.core.store import ObjectStore, ValueStore, new_stores
from lua_semantics.core.terms import (
    EMPTY_TUPLE, FALSE, SKIP, TRUE, VARARG_NAME, BuiltIn, EngineFault, ErrorValue, Label,
    LabeledExpr, Return, Skip, StuckFault, Term, Tuple_, Value, is_value_tuple, substitute,
    type_name,
)
from lua_semantics.utils.logging_utils import get_logger

logger = get_logger("core.machine")

DEFAULT_FUEL = 10_000_000
RECURSION_LIMIT = 20_000


@dataclass
class Configuration:
    """Value store, object store and the term being reduced."""
    sigma: ValueStore
    theta: ObjectStore
    term: Term


@dataclass
class Outcome:
    """How a run ended; ``steps`` is the number of reductions performed."""
    configuration: Configuration
    steps = 0


@dataclass
class Completed(Outcome):
    """The term reduced to ``;`` or to values."""

    @property
    def result(self) -> Term:
        return self.configuration.term


@dataclass
class Errored(Outcome):
    """The term reduced to ``$err v`` outside any protected call."""
    value: Value


@dataclass
class FuelExhausted(Outcome):
    pass


@dataclass
class Stuck(Outcome):
    """No rule applies to the redex; this is an engine defect, not a Lua error."""
    diagnostic: str


@dataclass
class Transition:
    configuration: Configuration
    rule_id: str


@dataclass
class TraceStep:
    """One reduction in a trace, with the store entries it touched."""
    index: int
    rule_id: str
    configuration: Configuration
    touched_values: Tuple[int, ...] = ()
    touched_objects: Tuple[int, ...] = ()


def inject(program: Term) -> Configuration:
    """
    Build the initial configuration for a parsed chunk.

    The library is bootstrapped into fresh stores, ``_ENV`` is bound to the
    global table and the chunk's ``...`` to the empty tuple. The program is
    not run in protected mode: an uncaught error aborts it.
    """
    sigma, theta = new_stores()
    sigma, theta, env_ref = bootstrap_env(sigma, theta)
    term = substitute(program, {"_ENV": env_ref, VARARG_NAME: EMPTY_TUPLE})
    return Configuration(sigma, theta, term)


def load_program(source: bytes, chunk_name: str = "?") -> Configuration:
    """Parse a chunk and inject it.

    Raises:
        ParseError: If the source is not a valid chunk
    """
    return inject(parse_chunk(source, chunk_name))


# Rules that need the whole context

def _top_level(context: EvaluationContext, redex: Term, sigma, theta, host) -> Optional[StepResult]:
    if context.frames:
        return None
    focus = unconsumed_control_focus(redex)
    if isinstance(focus, ErrorValue):
        return StepResult(None, None, focus, "error/abort")
    if isinstance(focus, Return):
        return StepResult(None, None, SKIP, "return/top-level")
    return None


def _protected(context: EvaluationContext, redex: Term, sigma, theta, host) -> Optional[StepResult]:
    if not isinstance(redex, LabeledExpr) or redex.label is not Label.PROT_MD:
        return None
    body = redex.body
    if isinstance(body, Skip):
        return StepResult(None, None, Tuple_((TRUE,)), "protected/skip")
    if isinstance(body, Value):
        return StepResult(None, None, Tuple_((TRUE, body)), "protected/values")
    if is_value_tuple(body):
        return StepResult(None, None, Tuple_((TRUE,) + body.items), "protected/values")
    focus = label_focus(redex)
    if isinstance(focus, ErrorValue):
        return StepResult(None, None, Tuple_((FALSE, focus.value)), "error/protected")
    return None


def _stateless_stmt(context, redex, sigma, theta, host):
    return step_stateless_stmt(redex)


def _stateless_expr(context, redex, sigma, theta, host):
    return step_stateless_expr(redex)


def _stateful(context, redex, sigma, theta, host):
    return step_stateful(redex, sigma, theta)


def _funcall(context, redex, sigma, theta, host):
    return step_funcall(redex, sigma, theta)


def _builtin(context, redex, sigma, theta, host):
    if isinstance(redex, BuiltIn):
        host.call_sites = context.call_sites()
    return step_builtin(redex, sigma, theta, host)


def _metatable(context, redex, sigma, theta, host):
    return step_metatable(redex, sigma, theta)


Relation = Callable[[EvaluationContext, Term, ValueStore, ObjectStore, Host], Optional[StepResult]]

# Order in which relations are tried; they are mutually exclusive, so the
# order never changes which rule fires.
RELATIONS: Tuple[Tuple[str, Relation], ...] = (
    ("top-level", _top_level),
    ("protected", _protected),
    ("stateless-stmt", _stateless_stmt),
    ("stateless-expr", _stateless_expr),
    ("stateful", _stateful),
    ("funcall", _funcall),
    ("builtin", _builtin),
    ("metatable", _metatable),
)


def reduce(context: EvaluationContext, redex: Term, sigma: ValueStore, theta: ObjectStore,
           host: Host) -> StepResult:
    """
    Rewrite ``redex`` with the first relation that has a matching rule.

    Raises:
        StuckFault: If no rule matches
    """
    for _, relation in RELATIONS:
        result = relation(context, redex, sigma, theta, host)
        if result is not None:
            return result
    raise StuckFault(f"no rule applies to {type(redex).__name__}")


def applicable_rules(context: EvaluationContext, redex: Term, sigma: ValueStore,
                     theta: ObjectStore) -> List[str]:
    """Every rule of every relation that matches ``redex``, tried on forked stores."""
    matched = []
    for _, relation in RELATIONS:
        result = relation(context, redex, sigma.fork(), theta.fork(), NullHost())
        if result is not None:
            matched.append(result.rule_id)
    return matched


def _final_outcome(config: Configuration) -> Outcome:
    if isinstance(config.term, ErrorValue):
        return Errored(config, config.term.value)
    return Completed(config)


def step(config: Configuration, host: Optional[Host] = None) -> Union[Transition, Outcome]:
    """
    Perform one reduction.

    Args:
        config: Configuration to reduce; its stores are updated in place
        host: Receives program output; discarded when None

    Returns:
        The successor configuration with the rule that produced it, or the
        Outcome when ``config`` is final or no rule applies
    """
    split = decompose(config.term)
    if isinstance(split, Answer):
        return _final_outcome(config)
    config.sigma.begin_step()
    config.theta.begin_step()
    try:
        result = reduce(split.context, split.redex, config.sigma, config.theta,
                        host if host is not None else NullHost())
        term = split.context.plug(result.term)
    except EngineFault as e:
        logger.error(f"Reduction stuck: {e}")
        return Stuck(config, str(e))
    return Transition(Configuration(config.sigma, config.theta, term), result.rule_id)


def run(config: Configuration, fuel: int = DEFAULT_FUEL, host: Optional[Host] = None) -> Outcome:
    """
    Reduce until the term is final, no rule applies, or ``fuel`` reductions were made.

    Args:
        config: Initial configuration
        fuel: Maximum number of reductions
        host: Receives program output

    Returns:
        Completed, Errored, Stuck or FuelExhausted
    """
    steps = 0
    while True:
        result = step(config, host)
        if isinstance(result, Outcome):
            result.steps = steps
            return result
        if steps == fuel:
            logger.info(f"Fuel exhausted after {steps} steps")
            exhausted = FuelExhausted(config)
            exhausted.steps = steps
            return exhausted
        config = result.configuration
        steps += 1


def trace(config: Configuration, host: Optional[Host] = None,
          fuel: int = DEFAULT_FUEL) -> Iterator[Union[TraceStep, Outcome]]:
    """
    Reduce step by step, yielding every reduction and finally the Outcome.

    Yields:
        A TraceStep per reduction, then exactly one Outcome
    """
    steps = 0
    while True:
        result = step(config, host)
        if isinstance(result, Outcome):
            result.steps = steps
            yield result
            return
        if steps == fuel:
            exhausted = FuelExhausted(config)
            exhausted.steps = steps
            yield exhausted
            return
        steps += 1
        config = result.configuration
        yield TraceStep(steps, result.rule_id, config,
                        tuple(config.sigma.touched), tuple(config.theta.touched))


def describe_error(value: Value) -> str:
    """Message the stand-alone interpreter prints for an uncaught error object."""
    if type_name(value) in ("string", "number"):
        return tostring_primitive(value).decode("utf-8", "replace")
    return f"(error object is a {type_name(value)} value)"


class Machine:
    """Runs chunks with a fixed step budget and collects their output."""

    def __init__(self, fuel: int = DEFAULT_FUEL, output: Optional[Callable[[bytes], None]] = None):
        """
        Initialize the machine.

        Args:
            fuel: Maximum number of reductions per run
            output: Sink for program output; collected in memory when None
        """
        self.fuel = fuel
        self.host = Host(output)
        if sys.getrecursionlimit() < RECURSION_LIMIT:
            # substitution and rendering recurse over term depth
            sys.setrecursionlimit(RECURSION_LIMIT)

    def load(self, source: bytes, chunk_name: str = "?") -> Configuration:
        return load_program(source, chunk_name)

    def run(self, config: Configuration) -> Outcome:
        logger.debug(f"Running with fuel {self.fuel}")
        outcome = run(config, self.fuel, self.host)
        logger.debug(f"{type(outcome).__name__} after {outcome.steps} steps")
        return outcome

    def run_source(self, source: bytes, chunk_name: str = "?") -> Outcome:
        """Parse, inject and run a chunk.

        Raises:
            ParseError: If the source is not a valid chunk
        """
        return self.run(self.load(source, chunk_name))

    def trace(self, config: Configuration) -> Iterator[Union[TraceStep, Outcome]]:
        return trace(config, self.host, self.fuel)

    @property
    def output(self) -> bytes:
        return self.host.getvalue()
