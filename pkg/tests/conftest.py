import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from minidyn.harness import ExperimentConfig, corpus_dir, list_programs, run_suite  # noqa: E402

# criterion number -> (passed, detail), filled in by test_acceptance
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def corpus():
    """Benchmark name -> source text."""
    return {p.stem: p.read_text() for p in list_programs([corpus_dir()])}


@pytest.fixture(scope="session")
def default_report():
    """The full default sweep (all modes, limits 0,1,2,5,inf) over the bundled corpus."""
    return run_suite(ExperimentConfig())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
