"""Causal access to history and the chronological walk shared by training and evaluation."""
from __future__ import annotations

import numpy as np

from rlgnet.data import SnapshotSequence
from rlgnet.history import CandidateIndex, build_index, snapshot_candidates

SINGLE_STEP = "single_step"
MULTI_STEP = "multi_step"
MODES = (SINGLE_STEP, MULTI_STEP)


class CausalityError(RuntimeError):
    """A scorer tried to read a snapshot at or beyond its horizon."""


class HistoryView:
    """Read-only view of everything strictly before ``horizon``.

    Scorers receive one of these instead of the raw sequence, so any attempt to
    look at a fact at time ``>= horizon`` fails loudly.
    """

    def __init__(self, seq: SnapshotSequence, index: CandidateIndex, horizon: int):
        if index.frontier != horizon:
            raise CausalityError(f"index frontier {index.frontier} != horizon {horizon}")
        self.seq = seq
        self.index = index
        self.horizon = horizon
        self.max_accessed = -1

    @property
    def num_entities(self):
        return self.seq.num_entities

    @property
    def num_relations(self):
        return self.seq.num_relations

    def snapshot(self, t: int) -> np.ndarray:
        if t < 0 or t >= self.horizon:
            raise CausalityError(f"snapshot {t} is outside the visible history [0, {self.horizon})")
        self.max_accessed = max(self.max_accessed, t)
        return self.seq.snapshots[t]

    def window(self, t_q: int, m: int) -> list[int]:
        """The last ``m`` visible timestamps before ``t_q`` (fewer near the start)."""
        end = min(t_q, self.horizon)
        return list(range(max(0, end - m), end))

    def window_candidates(self, t: int, keys: np.ndarray):
        return snapshot_candidates(self.snapshot(t), keys, self.seq.num_relations)

    def candidates(self, keys: np.ndarray, k):
        if self.index.frontier != self.horizon:
            raise CausalityError("candidate index advanced past the view horizon")
        return self.index.candidate_arrays(keys, k)


def walk(seq: SnapshotSequence, split: str, mode: str = SINGLE_STEP, index: CandidateIndex | None = None):
    """Yield ``(t, view)`` for each timestamp of ``split`` in order.

    The history before the split is always visible. In single-step mode each
    evaluated snapshot is ingested afterwards; in multi-step mode the history
    stays frozen at the first timestamp of the split.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    ts = seq.split_range(split)
    if index is None:
        index = build_index(seq, ts.start)
    elif index.frontier != ts.start:
        raise CausalityError(f"index frontier {index.frontier} does not match split start {ts.start}")
    for t in ts:
        horizon = t if mode == SINGLE_STEP else ts.start
        yield t, HistoryView(seq, index, horizon)
        if mode == SINGLE_STEP:
            index.ingest_snapshot(seq.snapshots[t], t)


def filter_lists(snapshot: np.ndarray):
    """CSR lists of all true objects for each fact's (s, r) within the same snapshot."""
    qidx, objs = _self_candidates(snapshot)
    ptr = np.zeros(snapshot.shape[0] + 1, dtype=np.int64)
    np.add.at(ptr, qidx + 1, 1)
    return np.cumsum(ptr), objs


def _self_candidates(snapshot):
    if snapshot.shape[0] == 0:
        e = np.zeros(0, dtype=np.int64)
        return e, e
    width = int(snapshot[:, 1].max()) + 1
    return snapshot_candidates(snapshot, snapshot[:, :2], width)
