"""Per-query candidate statistics, repeating facts and their proportion."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from rlgnet import kernels
from rlgnet.data import SnapshotSequence, add_reverse_relations

INDEX_FORMAT = "rlgnet-candidate-index"
INDEX_VERSION = 1


class OrderingError(Exception):
    """Snapshots were ingested out of chronological order."""


class IndexFormatError(Exception):
    pass


class FrequencyRecencyRecord(NamedTuple):
    object: int
    count: int
    last_seen: int


def _normalize_k(k) -> int | None:
    if k is None:
        return None
    if isinstance(k, float) and math.isinf(k):
        return None
    if isinstance(k, str) and k.lower() in ("inf", "infinity", "∞"):
        return None
    k = int(k)
    if k <= 0:
        raise ValueError("k must be a positive integer or infinity")
    return k


def _sort_key(rec):
    return (-rec[1], -rec[2], rec[0])


class CandidateIndex:
    """Occurrence count and last occurrence of every object, per (subject, relation).

    Only facts at timestamps ``< frontier`` have been ingested; snapshots must
    be fed in order via :meth:`ingest_snapshot`.
    """

    def __init__(self):
        self.frontier = 0
        self._table: dict[tuple[int, int], dict[int, list[int]]] = {}
        self._frozen = False

    def __len__(self):
        return len(self._table)

    def keys(self):
        return self._table.keys()

    def freeze(self) -> "CandidateIndex":
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    def copy(self) -> "CandidateIndex":
        other = CandidateIndex()
        other.frontier = self.frontier
        other._table = {k: {o: list(v) for o, v in recs.items()} for k, recs in self._table.items()}
        return other

    def ingest_snapshot(self, snapshot, t: int) -> "CandidateIndex":
        if self._frozen:
            raise OrderingError("index is frozen")
        if t != self.frontier:
            raise OrderingError(f"expected snapshot {self.frontier}, got {t}")
        table = self._table
        for s, r, o in np.asarray(snapshot, dtype=np.int64).reshape(-1, 3).tolist():
            recs = table.get((s, r))
            if recs is None:
                recs = table[(s, r)] = {}
            rec = recs.get(o)
            if rec is None:
                recs[o] = [1, t]
            else:
                rec[0] += 1
                rec[1] = t
        self.frontier = t + 1
        return self

    def ingest_until(self, seq: SnapshotSequence, stop: int) -> "CandidateIndex":
        for t in range(self.frontier, stop):
            self.ingest_snapshot(seq.snapshots[t], t)
        return self

    def records(self, key) -> list[FrequencyRecencyRecord]:
        recs = self._table.get((int(key[0]), int(key[1])), {})
        return [FrequencyRecencyRecord(o, c, l) for o, (c, l) in recs.items()]

    def top_k_candidates(self, key, k=None) -> list[FrequencyRecencyRecord]:
        """Records of ``key`` by count (desc), then last_seen (desc), then object id."""
        k = _normalize_k(k)
        recs = self._table.get((int(key[0]), int(key[1])))
        if not recs:
            return []
        items = sorted(((o, c, l) for o, (c, l) in recs.items()), key=_sort_key)
        if k is not None:
            items = items[:k]
        return [FrequencyRecencyRecord(*it) for it in items]

    def candidate_arrays(self, keys, k=None):
        """Padded top-k candidates for a batch of ``(s, r)`` keys.

        Returns ``(objects, counts, last_seen, mask)``, each ``(len(keys), K)``
        with ``K >= 1``; padding slots have ``mask == False``.
        """
        keys = np.asarray(keys, dtype=np.int64).reshape(-1, 2)
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        lists = [self.top_k_candidates(key, k) for key in uniq.tolist()]
        width = max([1] + [len(x) for x in lists])
        n = len(uniq)
        obj = np.zeros((n, width), dtype=np.int64)
        cnt = np.zeros((n, width), dtype=np.int64)
        last = np.zeros((n, width), dtype=np.int64)
        mask = np.zeros((n, width), dtype=bool)
        for i, recs in enumerate(lists):
            if recs:
                a = np.asarray(recs, dtype=np.int64)
                m = a.shape[0]
                obj[i, :m], cnt[i, :m], last[i, :m] = a[:, 0], a[:, 1], a[:, 2]
                mask[i, :m] = True
        return obj[inv], cnt[inv], last[inv], mask[inv]

    def dump(self, path: str) -> None:
        """Text snapshot: versioned header, then sorted ``s r o count last_seen`` rows."""
        rows = sorted(
            (s, r, o, c, l) for (s, r), recs in self._table.items() for o, (c, l) in recs.items()
        )
        with open(path, "w") as f:
            f.write(f"# {INDEX_FORMAT} v{INDEX_VERSION} frontier={self.frontier} records={len(rows)}\n")
            for row in rows:
                f.write("%d %d %d %d %d\n" % row)

    @classmethod
    def load(cls, path: str) -> "CandidateIndex":
        with open(path) as f:
            header = f.readline().split()
            if len(header) < 4 or header[1] != INDEX_FORMAT:
                raise IndexFormatError(f"{path}: not a candidate index file")
            if header[2] != f"v{INDEX_VERSION}":
                raise IndexFormatError(f"{path}: unsupported index version {header[2]}")
            fields = dict(h.split("=", 1) for h in header[3:])
            idx = cls()
            idx.frontier = int(fields["frontier"])
            n = 0
            for line in f:
                s, r, o, c, l = (int(x) for x in line.split())
                idx._table.setdefault((s, r), {})[o] = [c, l]
                n += 1
            if n != int(fields.get("records", n)):
                raise IndexFormatError(f"{path}: truncated ({n} of {fields['records']} records)")
        return idx

    def __eq__(self, other):
        return (
            isinstance(other, CandidateIndex)
            and self.frontier == other.frontier
            and self._table == other._table
        )


def build_index(seq: SnapshotSequence, stop: int | None = None) -> CandidateIndex:
    return CandidateIndex().ingest_until(seq, seq.num_timestamps if stop is None else stop)


@dataclass(frozen=True)
class RepeatingGraph:
    """``masks[t][i]`` is True iff fact ``seq.snapshots[t][i]`` is a repeating fact."""

    seq: SnapshotSequence
    k: int | None
    masks: tuple

    @property
    def snapshots(self):
        return tuple(s[m] for s, m in zip(self.seq.snapshots, self.masks))

    def count(self) -> int:
        return int(sum(int(m.sum()) for m in self.masks))


def build_repeating_graph(seq: SnapshotSequence, k=20, backend: str | None = None) -> RepeatingGraph:
    k = _normalize_k(k)
    quads = seq.quadruples()
    flags = kernels.repeating_mask(
        quads[:, 0], quads[:, 1], quads[:, 2], quads[:, 3],
        seq.num_entities, max(seq.num_relations, 1), k, backend=backend,
    )
    sizes = np.cumsum([0] + [s.shape[0] for s in seq.snapshots])
    masks = tuple(flags[sizes[t]:sizes[t + 1]] for t in range(seq.num_timestamps))
    return RepeatingGraph(seq=seq, k=k, masks=masks)


def repeating_proportion(seq: SnapshotSequence, k=None, backend: str | None = None) -> float:
    """Percentage of facts (reverse-augmented, all splits) that are repeating at top-k."""
    if not seq.augmented:
        seq = add_reverse_relations(seq)
    total = seq.num_facts()
    if total == 0:
        return 0.0
    rep = build_repeating_graph(seq, k, backend=backend)
    return 100.0 * rep.count() / total


def snapshot_candidates(snapshot: np.ndarray, keys: np.ndarray, num_relations: int):
    """Objects ``o`` with ``(s, r, o)`` in ``snapshot`` for each query key.

    Returns ``(query_idx, objects)`` pairs, grouped by query.
    """
    keys = np.asarray(keys, dtype=np.int64).reshape(-1, 2)
    if snapshot.shape[0] == 0 or keys.shape[0] == 0:
        e = np.zeros(0, dtype=np.int64)
        return e, e
    code = snapshot[:, 0] * num_relations + snapshot[:, 1]
    order = np.argsort(code, kind="stable")
    code_s = code[order]
    obj_s = snapshot[order, 2]
    qcode = keys[:, 0] * num_relations + keys[:, 1]
    lo = np.searchsorted(code_s, qcode, side="left")
    hi = np.searchsorted(code_s, qcode, side="right")
    counts = hi - lo
    qidx = np.repeat(np.arange(keys.shape[0]), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    return qidx, obj_s[np.repeat(lo, counts) + offs]
