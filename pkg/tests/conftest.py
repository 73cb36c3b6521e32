import numpy as np
import pytest

from seeddistill.corpus import EmbeddingTable, SeedLexicon, SegmentRecord

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def lex():
    return SeedLexicon.from_mapping({"Price": ["price", "value"], "Sound": ["sound"], "General": []})


@pytest.fixture
def seg():
    def make(tokens, label=None, sid="s0"):
        return SegmentRecord("r0", sid, tuple(tokens), label)

    return make


@pytest.fixture
def toy_emb():
    return EmbeddingTable(["a", "b", "c"], np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
