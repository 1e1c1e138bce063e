#!/usr/bin/env python3
"""
Command Line Interface for the Lua reduction-semantics engine.

Programs can be run, traced step by step, parsed into their term form and
checked against a conformance corpus. Exit codes: 0 when the program
completes, 1 on an uncaught Lua error, 2 on a parse error and 3 when the
step budget runs out or the engine gets stuck.
"""

import shutil
import subprocess
import sys
from pathlib import Path
from typing import NoReturn, Optional

import click

from lua_semantics import __version__
from lua_semantics.core.conformance import (
    REFERENCE_INTERPRETER, chunk_name_for, discover_cases, record_expected, run_corpus, save_report,
)
from lua_semantics.core.lexer import ParseError
from lua_semantics.core.machine import (
    Completed, Errored, FuelExhausted, Machine, Outcome, Stuck, TraceStep, describe_error,
)
from lua_semantics.core.parser import parse_chunk
from lua_semantics.core.pretty import render_source, render_trace
from lua_semantics.utils.config_manager import ConfigManager, ConfigurationError
from lua_semantics.utils.logging_utils import get_logger, setup_logging

EXIT_COMPLETED = 0
EXIT_LUA_ERROR = 1
EXIT_PARSE_ERROR = 2
EXIT_NO_RESULT = 3


# Common options for multiple commands
def common_options(function):
    """Common CLI options decorator."""
    function = click.option(
        '--config', '-c',
        type=click.Path(exists=True),
        help='Path to configuration file (YAML or JSON)'
    )(function)
    function = click.option(
        '--verbose', '-v',
        is_flag=True,
        help='Enable verbose output'
    )(function)
    function = click.option(
        '--log-level',
        type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'], case_sensitive=False),
        default=None,
        help='Set logging level (default from configuration)'
    )(function)
    function = click.option(
        '--log-file',
        type=click.Path(),
        help='Log file path'
    )(function)
    return function


def prepare(config: Optional[str], verbose: bool, log_level: Optional[str], log_file: Optional[str],
            overrides: dict) -> ConfigManager:
    """Load configuration, apply command-line overrides and set up logging."""
    try:
        config_manager = ConfigManager(config)
    except ConfigurationError as e:
        raise click.UsageError(str(e))
    config_manager.update({key: value for key, value in overrides.items() if value is not None})

    level = "DEBUG" if verbose else (log_level or config_manager.get('log_level', 'WARNING'))
    setup_logging(log_level=level, log_file=log_file or config_manager.get('log_file'))

    issues = config_manager.validate()
    if issues:
        for key, issue in issues.items():
            click.secho(f"Configuration issue: {key}: {issue}", fg='red', err=True)
        raise click.UsageError("invalid configuration")
    return config_manager


def finish(code: int) -> NoReturn:
    click.get_current_context().exit(code)


def report_outcome(outcome: Outcome) -> int:
    """Print how a run ended on stderr and return the exit code for it."""
    if isinstance(outcome, Completed):
        return EXIT_COMPLETED
    if isinstance(outcome, Errored):
        click.secho(f"lua: {describe_error(outcome.value)}", fg='red', err=True)
        return EXIT_LUA_ERROR
    if isinstance(outcome, FuelExhausted):
        click.secho(f"lua: step budget exhausted after {outcome.steps} steps", fg='yellow', err=True)
        return EXIT_NO_RESULT
    if isinstance(outcome, Stuck):
        click.secho(f"lua: engine stuck: {outcome.diagnostic}", fg='red', err=True)
    return EXIT_NO_RESULT


def load_source(machine: Machine, path: Path, chunk_name_mode: str):
    """Parse and inject a source file, exiting with the parse error code on failure."""
    try:
        return machine.load(path.read_bytes(), chunk_name_for(path, chunk_name_mode))
    except ParseError as e:
        click.secho(f"lua: {e}", fg='red', err=True)
        finish(EXIT_PARSE_ERROR)


def program_output():
    stdout = click.get_binary_stream('stdout')

    def write(data: bytes) -> None:
        stdout.write(data)
        stdout.flush()

    return write


def store_summary(step: TraceStep) -> str:
    config = step.configuration
    values = " ".join(f"$r{ref_id}" for ref_id in step.touched_values) or "-"
    objects = " ".join(f"$objr{obj_id}" for obj_id in step.touched_objects) or "-"
    return (f"    sigma: {len(config.sigma)} refs, touched {values}; "
            f"theta: {len(config.theta)} tables, touched {objects}")


@click.group()
@click.version_option(version=__version__)
def cli():
    """Small-step reduction semantics for Lua 5.2.

    Runs Lua programs by repeatedly splitting the program term into an
    evaluation context and a redex, and rewriting the redex with exactly
    one reduction rule.
    """
    pass


@cli.command('run')
@click.argument('source_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--fuel', type=int, help='Maximum number of reduction steps')
@common_options
def run(source_file, fuel, config, verbose, log_level, log_file):
    """Run a Lua program.

    SOURCE_FILE is the Lua chunk to run; its output goes to stdout.
    """
    config_manager = prepare(config, verbose, log_level, log_file, {'fuel': fuel})
    logger = get_logger("cli")

    machine = Machine(fuel=config_manager.get('fuel'), output=program_output())
    initial = load_source(machine, Path(source_file), config_manager.get('chunk_name_mode'))
    outcome = machine.run(initial)
    logger.info(f"{type(outcome).__name__} after {outcome.steps} steps")
    finish(report_outcome(outcome))


@cli.command('trace')
@click.argument('source_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--fuel', type=int, help='Maximum number of reduction steps')
@click.option('--max-print-depth', type=int, help='Elide subterms nested deeper than this')
@click.option('--stores/--no-stores', default=None, help='Show a store summary after each step')
@common_options
def trace(source_file, fuel, max_print_depth, stores, config, verbose, log_level, log_file):
    """Run a Lua program printing every reduction step.

    Each step is printed as ``#k [rule] term``. Program output is
    interleaved with the trace.
    """
    config_manager = prepare(config, verbose, log_level, log_file, {
        'fuel': fuel,
        'max_print_depth': max_print_depth,
        'trace_store_summary': stores,
    })
    depth = config_manager.get('max_print_depth')
    show_stores = config_manager.get('trace_store_summary')

    machine = Machine(fuel=config_manager.get('fuel'), output=program_output())
    initial = load_source(machine, Path(source_file), config_manager.get('chunk_name_mode'))
    click.echo(f"#0 {render_trace(initial.term, depth)}")

    outcome = None
    for item in machine.trace(initial):
        if isinstance(item, TraceStep):
            click.echo(f"#{item.index} [{item.rule_id}] {render_trace(item.configuration.term, depth)}")
            if show_stores:
                click.echo(store_summary(item))
        else:
            outcome = item

    click.secho(f"{type(outcome).__name__} after {outcome.steps} steps", fg='blue', err=True)
    finish(report_outcome(outcome))


@cli.command('parse')
@click.argument('source_file', type=click.Path(exists=True, dir_okay=False))
@common_options
def parse(source_file, config, verbose, log_level, log_file):
    """Print the term a Lua program parses to.

    SOURCE_FILE is the Lua chunk to parse.
    """
    config_manager = prepare(config, verbose, log_level, log_file, {})
    path = Path(source_file)
    try:
        term = parse_chunk(path.read_bytes(), chunk_name_for(path, config_manager.get('chunk_name_mode')))
    except ParseError as e:
        click.secho(f"lua: {e}", fg='red', err=True)
        finish(EXIT_PARSE_ERROR)
    click.echo(render_source(term, multiline=True))


@cli.command('test')
@click.argument('corpus_dir', type=click.Path(exists=True, file_okay=False))
@click.option('--fuel', type=int, help='Maximum number of reduction steps per case')
@click.option('--parallel/--no-parallel', default=None, help='Enable/disable parallel execution')
@click.option('--threads', type=int, help='Number of worker threads for parallel execution')
@click.option('--report', type=click.Path(), help='Write a JSON report to this file')
@common_options
def test(corpus_dir, fuel, parallel, threads, report, config, verbose, log_level, log_file):
    """Run a conformance corpus.

    CORPUS_DIR holds one directory per feature, each with ``.lua``
    programs and their ``.expected`` output.
    """
    config_manager = prepare(config, verbose, log_level, log_file, {
        'corpus_fuel': fuel,
        'parallel': parallel,
        'max_worker_threads': threads,
    })

    click.secho(f"Running corpus in {corpus_dir}", fg='blue')
    results = run_corpus(
        corpus_dir,
        fuel=config_manager.get('corpus_fuel'),
        parallel=config_manager.get('parallel'),
        max_workers=config_manager.get('max_worker_threads'),
        chunk_name_mode=config_manager.get('chunk_name_mode'),
    )

    for result in results.results:
        if result.passed:
            click.secho(f"  PASS {result.case.case_id} ({result.steps} steps)", fg='green')
        else:
            click.secho(f"  FAIL {result.case.case_id}: {result.detail}", fg='red')

    if results.total:
        click.secho("\nBy feature:", fg='blue')
        for feature, counts in results.by_feature().items():
            colour = 'green' if counts['passed'] == counts['total'] else 'red'
            click.secho(f"  {feature}: {counts['passed']}/{counts['total']}", fg=colour)

    if report:
        save_report(results, report)
        click.secho(f"Report saved to {report}", fg='blue')

    click.secho(results.summary_line(), fg='green' if results.failed == 0 else 'red')
    finish(0 if results.failed == 0 else 1)


@cli.command('record')
@click.argument('corpus_dir', type=click.Path(exists=True, file_okay=False))
@click.option('--lua', 'interpreter', default=REFERENCE_INTERPRETER, show_default=True,
              help='Reference Lua 5.2 interpreter')
@click.option('--timeout', type=float, default=60.0, show_default=True,
              help='Seconds allowed per case')
@click.option('--check', is_flag=True, help='Report differences without writing files')
@common_options
def record(corpus_dir, interpreter, timeout, check, config, verbose, log_level, log_file):
    """Record expected outputs with a reference interpreter.

    Every case in CORPUS_DIR is run with the stand-alone interpreter and its
    standard output replaces the ``.expected`` file.
    """
    prepare(config, verbose, log_level, log_file, {})
    if shutil.which(interpreter) is None:
        raise click.UsageError(f"interpreter not found: {interpreter}")

    changed = timeouts = 0
    for case in discover_cases(corpus_dir):
        try:
            recorded = record_expected(case, interpreter, timeout, write=not check)
        except subprocess.TimeoutExpired:
            click.secho(f"  TIMEOUT {case.case_id}", fg='red')
            timeouts += 1
            continue
        if recorded.changed:
            changed += 1
            click.secho(f"  {'DIFFERS' if check else 'UPDATED'} {case.case_id}", fg='yellow')
        else:
            click.secho(f"  SAME {case.case_id}", fg='green')

    click.secho(f"{changed} expected output(s) {'differ' if check else 'changed'}", fg='blue')
    finish(1 if timeouts or (check and changed) else 0)


@cli.group('config')
def config_group():
    """Configuration management commands."""
    pass


@config_group.command('generate')
@click.argument('output_file', type=click.Path())
def config_generate(output_file):
    """Generate default configuration file.

    OUTPUT_FILE is the path where the configuration file will be saved.
    """
    try:
        if ConfigManager().generate_default_config(output_file):
            click.secho(f"Default configuration generated at: {output_file}", fg='green')
            return
        click.secho("Failed to generate configuration file", fg='red')
    except (OSError, ConfigurationError) as e:
        click.secho(f"Error generating configuration: {e}", fg='red')
    finish(1)


@config_group.command('show')
@click.argument('config_file', type=click.Path(exists=True))
def config_show(config_file):
    """Show the effective configuration.

    CONFIG_FILE is layered over the defaults before display.
    """
    try:
        config_manager = ConfigManager(config_file)
    except ConfigurationError as e:
        click.secho(f"Error reading configuration: {e}", fg='red')
        finish(1)

    click.secho(f"Configuration from: {config_file}", fg='blue')
    for section, items in {
        'Machine Settings': ['fuel', 'corpus_fuel'],
        'Trace Settings': ['max_print_depth', 'trace_store_summary'],
        'Conformance Settings': ['parallel', 'max_worker_threads', 'chunk_name_mode'],
        'Logging Settings': ['log_level', 'log_file'],
    }.items():
        click.secho(f"\n{section}:", fg='green')
        for key in items:
            click.echo(f"  {key}: {config_manager.get(key)}")

    issues = config_manager.validate()
    if issues:
        click.secho("\nConfiguration Issues:", fg='red')
        for key, issue in issues.items():
            click.echo(f"  {key}: {issue}")


@config_group.command('validate')
@click.argument('config_file', type=click.Path(exists=True))
def config_validate(config_file):
    """Validate configuration file.

    CONFIG_FILE is the path to the configuration file to validate.
    """
    try:
        issues = ConfigManager(config_file).validate()
    except ConfigurationError as e:
        click.secho(f"Error validating configuration: {e}", fg='red')
        finish(1)

    if not issues:
        click.secho(f"Configuration is valid: {config_file}", fg='green')
        return
    click.secho(f"Configuration has issues: {config_file}", fg='red')
    for key, issue in issues.items():
        click.echo(f"  {key}: {issue}")
    finish(1)


def main():
    """Main entry point for the CLI."""
    return cli()


if __name__ == "__main__":
    sys.exit(main())
