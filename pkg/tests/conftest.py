from pathlib import Path

import pytest

from chrvis.syntax import parse_program, parse_query

CORPUS = Path(__file__).resolve().parents[1] / "src" / "chrvis" / "corpus"

SORT_QUERY = "cell(0,7), cell(1,6), cell(2,4)"
MIN_QUERY = "min(20), min(8), min(1)"


def load(name: str):
    return parse_program((CORPUS / f"{name}.chr").read_text())


def q(text: str):
    return parse_query(text)


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS


# criterion number -> (passed, description, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, what, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {what} ({detail})")
