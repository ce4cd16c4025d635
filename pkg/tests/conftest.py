"""Shared fixtures and the acceptance summary.

Tests in test_acceptance.py record one entry per criterion through the
``acceptance`` fixture; the terminal summary prints one PASS/FAIL line for
each recorded criterion so a full run ends with a readable scorecard.
"""

import numpy as np
import pytest

from freqseg import CLASS_NAMES, ClassEmbeddingTable, Dataset, gen_dataset, gen_pseudo_embeddings

CRITERIA = [
    "gradient_suite",
    "oracle_suite",
    "octave_reduction",
    "shape_contract",
    "cam_contract",
    "overfit_smoke",
    "ablation_ordering",
    "loss_weight_check",
]

_results: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    """Callable recording (criterion, passed, detail) for the summary."""

    def record(name: str, passed: bool, detail: str) -> None:
        assert name in CRITERIA, f"unknown criterion {name!r}"
        _results[name] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for name in CRITERIA:
        if name in _results:
            ok, detail = _results[name]
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        else:
            terminalreporter.write_line(f"FAIL {name}: not run")


# ---------------------------------------------------------------------------
# shared data fixtures


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Small rendered corpus shared by harness, CLI, and smoke tests."""
    root = tmp_path_factory.mktemp("corpus") / "small"
    gen_dataset(root, seed=3, per_class=6)
    return root


@pytest.fixture(scope="session")
def small_dataset(small_corpus):
    return Dataset.load(small_corpus)


@pytest.fixture(scope="session")
def embedding_table():
    vectors = gen_pseudo_embeddings(list(CLASS_NAMES), dim=1024, seed=0)
    return ClassEmbeddingTable.from_vectors(list(CLASS_NAMES), vectors)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
