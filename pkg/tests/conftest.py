import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vlbias.lexicon import load_lexicon, load_targets  # noqa: E402


@pytest.fixture(scope="session")
def lex():
    return load_lexicon()


@pytest.fixture(scope="session")
def coco_targets(lex):
    return load_targets("coco", lex)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance.LINES:
            terminalreporter.write_line(line)
