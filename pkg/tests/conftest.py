import numpy as np
import pytest

from mwcsel.graph import WeightedGraph, vertex_weights
from mwcsel.ingest import Trial, TrialSet, synth_trials

# pass/fail lines emitted by the acceptance suite, echoed in the summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_similarity(rng, n, low=0.0, high=1.0):
    """Symmetric matrix with entries in ``[low, high)`` and a unit diagonal."""
    a = rng.uniform(low, high, size=(n, n))
    a = np.triu(a, 1)
    a = a + a.T
    np.fill_diagonal(a, 1.0)
    return a


def random_graph(rng, n, n_classes=2):
    mu = random_similarity(rng, n)
    labels = rng.integers(0, n_classes, size=n)
    # make sure every class is present
    labels[:n_classes] = np.arange(n_classes)
    return WeightedGraph(tuple(range(n)), labels.astype(np.int64), vertex_weights(mu), mu)


def make_trials(rows, start_id=0):
    """``rows`` of ``(label, samples)``."""
    return TrialSet([Trial(start_id + k, lab, np.asarray(x, dtype=float))
                     for k, (lab, x) in enumerate(rows)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def noisy_set():
    return synth_trials(classes=2, per_class=20, length=64, noise_fraction=0.2, seed=3)


@pytest.fixture(scope="session")
def clean_set():
    return synth_trials(classes=2, per_class=10, length=64, noise_fraction=0.0, seed=7)
