"""Small generated datasets for tests, smoke runs and benchmarks."""
from __future__ import annotations

import numpy as np

from rlgnet.data import SnapshotSequence, from_quadruples


def toy_sequence(
    num_entities: int = 40,
    num_relations: int = 4,
    num_triples: int = 20,
    repeats: int = 5,
    num_timestamps: int = 10,
    seed: int = 0,
    valid_start: int | None = None,
    test_start: int | None = None,
) -> SnapshotSequence:
    """``num_triples`` distinct (s, r, o) triples, each placed at ``repeats`` distinct timestamps.

    Each relation maps subjects to objects through a fixed permutation, so
    every (s, r) and every (o, r^-1) has exactly one answer.
    """
    rng = np.random.default_rng(seed)
    perms = [rng.permutation(num_entities) for _ in range(num_relations)]
    keys = set()
    while len(keys) < num_triples:
        keys.add((int(rng.integers(num_entities)), int(rng.integers(num_relations))))
    rows = []
    for s, r in sorted(keys):
        for t in rng.choice(num_timestamps, size=repeats, replace=False):
            rows.append((s, r, int(perms[r][s]), int(t)))
    return from_quadruples(
        rows, num_entities, num_relations,
        valid_start=valid_start, test_start=test_start, num_timestamps=num_timestamps,
    )


def random_sequence(
    num_entities: int,
    num_relations: int,
    num_facts: int,
    num_timestamps: int,
    seed: int = 0,
    skew: float = 1.2,
) -> SnapshotSequence:
    """Zipf-skewed random facts; heavy repetition like real event data."""
    rng = np.random.default_rng(seed)
    w = 1.0 / np.arange(1, num_entities + 1) ** skew
    w /= w.sum()
    s = rng.choice(num_entities, num_facts, p=w)
    o = rng.choice(num_entities, num_facts, p=w)
    r = rng.integers(0, num_relations, num_facts)
    t = np.sort(rng.integers(0, num_timestamps, num_facts))
    n_t = num_timestamps
    return from_quadruples(
        np.column_stack([s, r, o, t]), num_entities, num_relations,
        valid_start=int(0.8 * n_t), test_start=int(0.9 * n_t), num_timestamps=n_t,
    )


def write_dataset(seq: SnapshotSequence, directory: str, time_gap: int = 1, extra_column: bool = False) -> str:
    """Write ``seq`` (non-augmented) in the tab-separated train/valid/test + stat.txt layout."""
    import os

    if seq.augmented:
        raise ValueError("write the raw (non-augmented) sequence")
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "stat.txt"), "w") as f:
        f.write(f"{seq.num_entities}\t{seq.num_relations_raw}\n")
    for split in ("train", "valid", "test"):
        with open(os.path.join(directory, f"{split}.txt"), "w") as f:
            for s, r, o, t in seq.quadruples(split).tolist():
                tail = "\t0" if extra_column else ""
                f.write(f"{s}\t{r}\t{o}\t{t * time_gap}{tail}\n")
    return directory
