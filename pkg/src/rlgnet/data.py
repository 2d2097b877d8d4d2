"""Loading TKG quadruple files into a time-ordered snapshot sequence."""
from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

log = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")

# dataset name -> raw time gap (in the units of the published files)
TIME_GAPS = {
    "ICEWS14": 24,
    "ICEWS14s": 24,
    "ICEWS18": 24,
    "ICEWS05-15": 24,
    "WIKI": 1,
    "YAGO": 1,
    "GDELT": 15,
}


class DatasetError(Exception):
    """Raised for malformed dataset content."""


class MissingFileError(DatasetError, FileNotFoundError):
    """A required dataset file does not exist."""


class Quadruple(NamedTuple):
    subject: int
    relation: int
    object: int
    timestamp: int


@dataclass(frozen=True, eq=False)
class SnapshotSequence:
    """Per-timestamp fact arrays.

    ``snapshots[t]`` is an ``(n, 3)`` int64 array of unique ``(s, r, o)`` rows,
    all occurring at snapshot index ``t``.
    """

    snapshots: tuple
    num_entities: int
    num_relations_raw: int
    valid_start: int
    test_start: int
    augmented: bool = False
    name: str = ""
    entity_names: dict = field(default_factory=dict, repr=False)
    relation_names: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not 0 <= self.valid_start <= self.test_start <= len(self.snapshots):
            raise DatasetError(
                f"split boundaries not monotone: valid_start={self.valid_start}, "
                f"test_start={self.test_start}, snapshots={len(self.snapshots)}"
            )

    @property
    def num_timestamps(self) -> int:
        return len(self.snapshots)

    @property
    def num_relations(self) -> int:
        """Size of the relation vocabulary actually used by the facts."""
        return 2 * self.num_relations_raw if self.augmented else self.num_relations_raw

    def split_range(self, split: str) -> range:
        if split == "train":
            return range(0, self.valid_start)
        if split == "valid":
            return range(self.valid_start, self.test_start)
        if split == "test":
            return range(self.test_start, self.num_timestamps)
        raise ValueError(f"unknown split {split!r}")

    def num_facts(self, split: str | None = None) -> int:
        ts = range(self.num_timestamps) if split is None else self.split_range(split)
        return int(sum(self.snapshots[t].shape[0] for t in ts))

    def quadruples(self, split: str | None = None) -> np.ndarray:
        """All facts as an ``(n, 4)`` array ``(s, r, o, t)``."""
        ts = range(self.num_timestamps) if split is None else self.split_range(split)
        parts = [
            np.column_stack([self.snapshots[t], np.full(self.snapshots[t].shape[0], t, dtype=np.int64)])
            for t in ts
        ]
        if not parts:
            return np.zeros((0, 4), dtype=np.int64)
        return np.concatenate(parts, axis=0)

    def __iter__(self):
        for t, snap in enumerate(self.snapshots):
            for s, r, o in snap:
                yield Quadruple(int(s), int(r), int(o), t)

    def subset(self, timestamps: range) -> "SnapshotSequence":
        """Contiguous slice of the sequence, re-indexed from 0; split boundaries are clipped."""
        lo = timestamps.start
        hi = timestamps.stop
        clip = lambda b: min(max(b - lo, 0), hi - lo)  # noqa: E731
        return SnapshotSequence(
            snapshots=tuple(self.snapshots[lo:hi]),
            num_entities=self.num_entities,
            num_relations_raw=self.num_relations_raw,
            valid_start=clip(self.valid_start),
            test_start=clip(self.test_start),
            augmented=self.augmented,
            name=self.name,
        )


def _unique_rows(arr: np.ndarray) -> np.ndarray:
    if arr.shape[0] == 0:
        return arr.reshape(0, 3)
    return np.unique(arr, axis=0)


def from_quadruples(
    quads,
    num_entities: int,
    num_relations: int,
    valid_start: int | None = None,
    test_start: int | None = None,
    augmented: bool = False,
    name: str = "",
    num_timestamps: int | None = None,
) -> SnapshotSequence:
    """Bucket already-normalized ``(s, r, o, t)`` rows into snapshots (deduplicated)."""
    quads = np.asarray(quads, dtype=np.int64).reshape(-1, 4)
    n_t = num_timestamps
    if n_t is None:
        n_t = int(quads[:, 3].max()) + 1 if quads.shape[0] else 0
    order = np.argsort(quads[:, 3], kind="stable")
    quads = quads[order]
    bounds = np.searchsorted(quads[:, 3], np.arange(n_t + 1))
    snaps = tuple(_unique_rows(quads[bounds[t]:bounds[t + 1], :3]) for t in range(n_t))
    return SnapshotSequence(
        snapshots=snaps,
        num_entities=int(num_entities),
        num_relations_raw=int(num_relations),
        valid_start=n_t if valid_start is None else valid_start,
        test_start=n_t if test_start is None else test_start,
        augmented=augmented,
        name=name,
    )


def _read_quads(path: str, num_entities: int, num_relations: int) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 4:
                raise DatasetError(f"{path}:{lineno}: expected at least 4 columns, got {len(parts)}")
            try:
                s, r, o, t = (int(x) for x in parts[:4])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-integer field in {line.strip()!r}") from None
            if not (0 <= s < num_entities and 0 <= o < num_entities):
                raise DatasetError(f"{path}:{lineno}: entity id out of range [0, {num_entities})")
            if not 0 <= r < num_relations:
                raise DatasetError(f"{path}:{lineno}: relation id {r} out of range [0, {num_relations})")
            if t < 0:
                raise DatasetError(f"{path}:{lineno}: negative timestamp {t}")
            rows.append((s, r, o, t))
    return np.asarray(rows, dtype=np.int64).reshape(-1, 4)


def _read_id_map(path: str) -> dict:
    out = {}
    if not os.path.exists(path):
        return out
    with open(path, encoding="utf-8") as f:
        for line in f:
            parts = line.rstrip("\n").split("\t")
            if len(parts) >= 2:
                try:
                    out[int(parts[1])] = parts[0]
                except ValueError:
                    continue
    return out


def read_stat(root: str) -> tuple[int, int]:
    path = os.path.join(root, "stat.txt")
    if not os.path.exists(path):
        raise MissingFileError(f"missing file: {path}")
    with open(path) as f:
        fields = f.read().split()
    if len(fields) < 2:
        raise DatasetError(f"{path}: expected '|E| |R|'")
    return int(fields[0]), int(fields[1])


def dataset_dir(root: str, name: str) -> str:
    """Resolve ``root/name`` if it exists, else treat ``root`` itself as the dataset directory."""
    cand = os.path.join(root, name)
    return cand if os.path.isdir(cand) else root


def fingerprint(root: str) -> str:
    """Content hash of the dataset files, used for cache validation."""
    h = hashlib.sha256()
    for fname in ("stat.txt",) + tuple(f"{s}.txt" for s in SPLITS):
        path = os.path.join(root, fname)
        if os.path.exists(path):
            with open(path, "rb") as f:
                h.update(fname.encode())
                h.update(f.read())
    return h.hexdigest()[:16]


def load_dataset(root_path: str, name: str = "", time_gap: int | None = None) -> SnapshotSequence:
    """Read ``train/valid/test.txt`` + ``stat.txt`` under ``root_path``.

    Raw timestamps are integer-divided by the time gap (``TIME_GAPS[name]``
    unless given) and then densified to 0..T-1. The returned sequence is not
    reverse-augmented.
    """
    root = root_path
    if not os.path.isdir(root):
        raise MissingFileError(f"dataset directory not found: {root}")
    num_entities, num_relations = read_stat(root)
    gap = time_gap if time_gap is not None else TIME_GAPS.get(name, 1)
    if gap <= 0:
        raise DatasetError(f"time gap must be positive, got {gap}")

    parts = {}
    for split in SPLITS:
        path = os.path.join(root, f"{split}.txt")
        if not os.path.exists(path):
            raise MissingFileError(f"missing file: {path}")
        parts[split] = _read_quads(path, num_entities, num_relations)
    if parts["train"].shape[0] == 0:
        raise DatasetError(f"{os.path.join(root, 'train.txt')}: no facts, cannot index timestamps")

    raw_t = {s: parts[s][:, 3] // gap for s in SPLITS}
    all_t = np.unique(np.concatenate(list(raw_t.values())))
    dense = {s: np.searchsorted(all_t, raw_t[s]) for s in SPLITS}

    if parts["valid"].shape[0] and dense["valid"].min() <= dense["train"].max():
        raise DatasetError("valid split overlaps the train period; files must be time-partitioned")
    if parts["test"].shape[0]:
        prev = np.concatenate([dense["train"], dense["valid"]])
        if dense["test"].min() <= prev.max():
            raise DatasetError("test split overlaps an earlier split; files must be time-partitioned")

    n_t = len(all_t)
    valid_start = int(dense["valid"].min()) if parts["valid"].shape[0] else int(dense["train"].max()) + 1
    test_start = int(dense["test"].min()) if parts["test"].shape[0] else n_t
    valid_start = min(valid_start, test_start)
    quads = np.concatenate(
        [np.column_stack([parts[s][:, :3], dense[s]]) for s in SPLITS], axis=0
    )
    seq = from_quadruples(
        quads,
        num_entities,
        num_relations,
        valid_start=valid_start,
        test_start=test_start,
        name=name,
        num_timestamps=n_t,
    )
    object.__setattr__(seq, "entity_names", _read_id_map(os.path.join(root, "entity2id.txt")))
    object.__setattr__(seq, "relation_names", _read_id_map(os.path.join(root, "relation2id.txt")))
    log.info(
        "loaded %s: |E|=%d |R|=%d T=%d train=%d valid=%d test=%d",
        name or root, num_entities, num_relations, n_t,
        parts["train"].shape[0], parts["valid"].shape[0], parts["test"].shape[0],
    )
    return seq


def add_reverse_relations(seq: SnapshotSequence) -> SnapshotSequence:
    """Add ``(o, r + |R|, s, t)`` for every ``(s, r, o, t)``."""
    if seq.augmented:
        raise ValueError("sequence is already reverse-augmented")
    R = seq.num_relations_raw
    snaps = []
    for snap in seq.snapshots:
        rev = np.column_stack([snap[:, 2], snap[:, 1] + R, snap[:, 0]])
        snaps.append(_unique_rows(np.concatenate([snap, rev], axis=0)))
    return SnapshotSequence(
        snapshots=tuple(snaps),
        num_entities=seq.num_entities,
        num_relations_raw=R,
        valid_start=seq.valid_start,
        test_start=seq.test_start,
        augmented=True,
        name=seq.name,
        entity_names=seq.entity_names,
        relation_names=seq.relation_names,
    )


def save_sequence(seq: SnapshotSequence, path: str) -> None:
    sizes = np.array([s.shape[0] for s in seq.snapshots], dtype=np.int64)
    flat = np.concatenate(seq.snapshots, axis=0) if seq.snapshots else np.zeros((0, 3), np.int64)
    np.savez_compressed(
        path,
        facts=flat,
        sizes=sizes,
        meta=np.array(
            [seq.num_entities, seq.num_relations_raw, seq.valid_start, seq.test_start, int(seq.augmented)],
            dtype=np.int64,
        ),
        name=np.array(seq.name),
    )


def load_sequence(path: str) -> SnapshotSequence:
    with np.load(path) as z:
        flat, sizes, meta = z["facts"], z["sizes"], z["meta"]
        name = str(z["name"])
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    snaps = tuple(flat[bounds[i]:bounds[i + 1]] for i in range(len(sizes)))
    return SnapshotSequence(
        snapshots=snaps,
        num_entities=int(meta[0]),
        num_relations_raw=int(meta[1]),
        valid_start=int(meta[2]),
        test_start=int(meta[3]),
        augmented=bool(meta[4]),
        name=name,
    )
