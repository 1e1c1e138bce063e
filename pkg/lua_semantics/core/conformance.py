"""
Conformance corpus runner.

A corpus is a directory of feature groups, each holding ``<name>.lua``
programs with their expected standard output in ``<name>.expected``. A case
that must end with an uncaught error also has ``<name>.err`` holding a
substring of the error message.
"""

import concurrent.futures
import json
import subprocess
import time
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional

from lua_semantics.core.lexer import ParseError
from lua_semantics.core.machine import Completed, Errored, Machine, describe_error
from lua_semantics.utils.logging_utils import ProgressLogger, get_logger

logger = get_logger("core.conformance")

FEATURES = ("calls", "closures", "constructs", "events", "locals", "math", "nextvar", "sort", "vararg")

COMPLETED = "completed"
ERRORED = "errored"

REFERENCE_INTERPRETER = "lua5.2"


@dataclass(frozen=True)
class CorpusCase:
    """One program of the corpus with its expectations."""
    feature: str
    name: str
    source_path: Path
    expected_stdout_path: Path
    expected_outcome: str = COMPLETED
    expected_error: Optional[str] = None

    @property
    def case_id(self) -> str:
        return f"{self.feature}/{self.name}"


@dataclass
class CaseResult:
    case: CorpusCase
    passed: bool
    outcome: str
    detail: str = ""
    steps: int = 0
    duration: float = 0.0

    def to_dict(self) -> Dict:
        return {
            'case': self.case.case_id,
            'feature': self.case.feature,
            'passed': self.passed,
            'outcome': self.outcome,
            'detail': self.detail,
            'steps': self.steps,
            'duration': round(self.duration, 4),
        }


@dataclass
class CorpusReport:
    """Results of a corpus run, kept sorted by case id."""
    results: List[CaseResult] = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.results)

    @property
    def passed(self) -> int:
        return sum(1 for result in self.results if result.passed)

    @property
    def failed(self) -> int:
        return self.total - self.passed

    @property
    def failures(self) -> List[CaseResult]:
        return [result for result in self.results if not result.passed]

    def by_feature(self) -> Dict[str, Dict[str, int]]:
        """Passed and total counts per feature group."""
        summary: Dict[str, Dict[str, int]] = {}
        for result in self.results:
            counts = summary.setdefault(result.case.feature, {'passed': 0, 'total': 0})
            counts['total'] += 1
            counts['passed'] += int(result.passed)
        return dict(sorted(summary.items()))

    def summary_line(self) -> str:
        if self.total == 0:
            return "0 cases"
        return f"{self.passed}/{self.total} passed"

    def to_dict(self) -> Dict:
        return {
            'timestamp': datetime.now().isoformat(),
            'total': self.total,
            'passed': self.passed,
            'failed': self.failed,
            'features': self.by_feature(),
            'results': [result.to_dict() for result in self.results],
        }


def discover_cases(corpus_dir) -> List[CorpusCase]:
    """
    Find every case under ``corpus_dir``.

    A program without a ``.expected`` file is skipped with a warning.

    Returns:
        Cases sorted by feature and name
    """
    root = Path(corpus_dir)
    cases = []
    for source in sorted(root.glob("*/*.lua")):
        expected = source.with_suffix(".expected")
        if not expected.is_file():
            logger.warning(f"Skipping {source}: no {expected.name}")
            continue
        err_file = source.with_suffix(".err")
        expected_error = None
        if err_file.is_file():
            expected_error = err_file.read_text(encoding="utf-8").strip()
        cases.append(CorpusCase(
            feature=source.parent.name,
            name=source.stem,
            source_path=source,
            expected_stdout_path=expected,
            expected_outcome=ERRORED if err_file.is_file() else COMPLETED,
            expected_error=expected_error,
        ))
    logger.info(f"Discovered {len(cases)} cases in {root}")
    return cases


def chunk_name_for(path: Path, mode: str = "name") -> str:
    """``@`` chunk name of a source file, from its full path or its file name."""
    return f"@{path.name}" if mode == "name" else f"@{path}"


def run_case(case: CorpusCase, fuel: int, chunk_name_mode: str = "name") -> CaseResult:
    """
    Run a single case and compare it with its expectations.

    Args:
        case: Case to run
        fuel: Step budget for the program
        chunk_name_mode: ``name`` or ``path``, see ``chunk_name_for``

    Returns:
        The result; never raises for Lua or parse errors
    """
    start = time.perf_counter()
    machine = Machine(fuel=fuel)
    source = case.source_path.read_bytes()
    expected_stdout = case.expected_stdout_path.read_bytes()

    try:
        outcome = machine.run_source(source, chunk_name_for(case.source_path, chunk_name_mode))
    except ParseError as e:
        return CaseResult(case, False, "parse-error", str(e), 0, time.perf_counter() - start)

    duration = time.perf_counter() - start
    outcome_name = type(outcome).__name__.lower()
    problems = []

    if isinstance(outcome, Completed):
        outcome_name = COMPLETED
        if case.expected_outcome != COMPLETED:
            problems.append(f"expected an error containing {case.expected_error!r}")
    elif isinstance(outcome, Errored):
        outcome_name = ERRORED
        message = describe_error(outcome.value)
        if case.expected_outcome != ERRORED:
            problems.append(f"unexpected error: {message}")
        elif case.expected_error and case.expected_error not in message:
            problems.append(f"error {message!r} does not contain {case.expected_error!r}")
    else:
        problems.append(f"run ended with {type(outcome).__name__}")

    if machine.output != expected_stdout:
        problems.append("stdout differs from expected output")

    return CaseResult(case, not problems, outcome_name, "; ".join(problems), outcome.steps, duration)


def run_corpus(corpus_dir, fuel: int, parallel: bool = True, max_workers: int = 4,
               chunk_name_mode: str = "name") -> CorpusReport:
    """
    Run every case of a corpus.

    Args:
        corpus_dir: Corpus root directory
        fuel: Step budget per case
        parallel: Run cases on a thread pool
        max_workers: Pool size when running in parallel
        chunk_name_mode: Chunk naming passed to ``run_case``

    Returns:
        Report with results sorted by case id
    """
    cases = discover_cases(corpus_dir)
    progress = ProgressLogger(logger, len(cases))

    def run_one(case: CorpusCase) -> CaseResult:
        result = run_case(case, fuel, chunk_name_mode)
        progress.update(result.passed)
        if not result.passed:
            logger.warning(f"{case.case_id} failed: {result.detail}")
        return result

    if parallel and len(cases) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
            results = list(executor.map(run_one, cases))
    else:
        results = [run_one(case) for case in cases]

    results.sort(key=lambda result: result.case.case_id)
    return CorpusReport(results)


def save_report(report: CorpusReport, report_path) -> None:
    """Write the report as JSON."""
    with open(report_path, 'w', encoding='utf-8') as f:
        json.dump(report.to_dict(), f, indent=2)
    logger.info(f"Report saved to {report_path}")


@dataclass
class RecordedCase:
    """Output of a case under the reference interpreter."""
    case: CorpusCase
    stdout: bytes
    errored: bool
    stderr: str = ""
    changed: bool = False


def record_expected(case: CorpusCase, interpreter: str = REFERENCE_INTERPRETER,
                    timeout: float = 60.0, write: bool = True) -> RecordedCase:
    """
    Run a case with a stand-alone Lua interpreter and record its output.

    The program runs from its own directory under its file name, so chunk
    names in the output match the ``name`` chunk-name mode.

    Args:
        case: Case to record
        interpreter: Command of the reference interpreter
        timeout: Seconds before the interpreter is stopped
        write: Replace the ``.expected`` file when the output differs

    Returns:
        The recorded output and whether it differs from the current file

    Raises:
        FileNotFoundError: If the interpreter cannot be started
        subprocess.TimeoutExpired: If the program runs longer than ``timeout``
    """
    completed = subprocess.run(
        [interpreter, case.source_path.name],
        cwd=str(case.source_path.parent),
        capture_output=True,
        timeout=timeout,
    )
    recorded = RecordedCase(
        case=case,
        stdout=completed.stdout,
        errored=completed.returncode != 0,
        stderr=completed.stderr.decode("utf-8", "replace").strip(),
    )
    if recorded.errored != (case.expected_outcome == ERRORED):
        logger.warning(f"{case.case_id}: reference run {'failed' if recorded.errored else 'succeeded'}"
                       f" but the case expects {case.expected_outcome}: {recorded.stderr}")

    current = case.expected_stdout_path.read_bytes() if case.expected_stdout_path.is_file() else None
    recorded.changed = current != recorded.stdout
    if recorded.changed and write:
        case.expected_stdout_path.write_bytes(recorded.stdout)
        logger.info(f"Recorded {case.expected_stdout_path}")
    return recorded
