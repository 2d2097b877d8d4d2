import numpy as np
import pytest
import torch

from rlgnet.data import add_reverse_relations, from_quadruples
from rlgnet.synthetic import random_sequence, toy_sequence

torch.set_num_threads(1)


@pytest.fixture
def toy():
    return add_reverse_relations(toy_sequence())


@pytest.fixture
def small_seq():
    return add_reverse_relations(random_sequence(30, 3, 400, 20, seed=1))


@pytest.fixture
def tiny_seq():
    """8 entities, 2 relations, 6 timestamps: train 0-3, valid 4, test 5."""
    rng = np.random.default_rng(7)
    rows = [(int(rng.integers(8)), int(rng.integers(2)), int(rng.integers(8)), t) for t in range(6) for _ in range(5)]
    return add_reverse_relations(from_quadruples(rows, 8, 2, valid_start=4, test_start=5, num_timestamps=6))


def brute_force_topk(quads, key, before, k=None):
    """Count and last occurrence of each object for ``key`` among facts with t < before, sorted."""
    stats = {}
    for s, r, o, t in quads:
        if (s, r) == key and t < before:
            c, last = stats.get(o, (0, -1))
            stats[o] = (c + 1, max(last, t))
    items = sorted(stats.items(), key=lambda kv: (-kv[1][0], -kv[1][1], kv[0]))
    if k is not None:
        items = items[:k]
    return [(o, c, last) for o, (c, last) in items]


# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
