import random
from pathlib import Path

import pytest

from structsum.corpus import build_document_set, load_dataset, load_stopwords

FIXTURE_DIR = Path(__file__).parent / "fixtures"
FIXTURE_JSONL = FIXTURE_DIR / "fixture.jsonl"
EXPECTED_RESULTS = FIXTURE_DIR / "expected_results.json"
SMALL_MODEL = FIXTURE_DIR / "model_small.json"
GOLDEN_SUMMARIES = FIXTURE_DIR / "golden_summaries.txt"


@pytest.fixture(scope="session")
def stopwords():
    return load_stopwords()


@pytest.fixture
def make_docset(stopwords):
    """Factory for small document sets out of raw document strings."""

    def _make(documents, set_id="set", budget=None, with_stopwords=True):
        sw = stopwords if with_stopwords else frozenset()
        return build_document_set(set_id, documents, sw, budget_bytes=budget)

    return _make


@pytest.fixture(scope="session")
def fixture_data(stopwords):
    return load_dataset(FIXTURE_JSONL, stopwords)


_WORDS = [
    "harbor", "signal", "velvet", "copper", "meadow", "lantern", "timber",
    "anchor", "ripple", "summit", "gravel", "cinder", "hollow", "marble",
    "the", "a", "of", "and", "in",
]


def random_documents(rng: random.Random, n_docs=2, sentences_per_doc=3, vocab=None):
    """Random plausible document strings; sentences start capitalized so the
    segmenter recovers them."""
    vocab = vocab or _WORDS
    docs = []
    for _ in range(n_docs):
        parts = []
        for _ in range(sentences_per_doc):
            n = rng.randint(2, 6)
            words = [rng.choice(vocab) for _ in range(n)]
            parts.append(" ".join(words).capitalize() + ".")
        docs.append(" ".join(parts))
    return docs


def random_sigma(rng: random.Random, n, low=0.0, high=1.0):
    """Symmetric similarity table as a dict keyed by ordered pairs."""
    table = {}
    for i in range(n):
        for j in range(i + 1, n):
            v = rng.uniform(low, high)
            table[(i, j)] = v
            table[(j, i)] = v
    return lambda i, j: table.get((i, j), 0.0)


# one verdict line per acceptance criterion, echoed after the test run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
