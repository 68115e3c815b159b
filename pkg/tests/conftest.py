from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dbg4eth.synth import generate_synthetic  # noqa: E402


@pytest.fixture(scope="session")
def small_ledger():
    return generate_synthetic(("exchange", "phishing", "mining"), 20, seed=3)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
