"""Backend selection for the hot loops.

The compiled extension (``rlgnet._kernels``) is used when it imports; the
numpy fallback in ``rlgnet._kernels_py`` otherwise. Setting the environment
variable ``RLGNET_PURE_PYTHON=1`` forces the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from rlgnet import _kernels_py

if os.environ.get("RLGNET_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from rlgnet import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

BACKENDS = {"python": _kernels_py}
if BACKEND == "cython":
    BACKENDS["cython"] = _impl


def _backend(name):
    if name is None:
        return _impl
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available (have {sorted(BACKENDS)})") from None


def repeating_mask(
    subj: np.ndarray,
    rel: np.ndarray,
    obj: np.ndarray,
    t: np.ndarray,
    num_entities: int,
    num_relations: int,
    k: int | None,
    backend: str | None = None,
) -> np.ndarray:
    """Boolean mask over facts: is the object a top-k candidate of (subject, relation)
    given only facts at strictly earlier timestamps?

    Facts may come in any order and must be unique. Candidates are ranked by
    occurrence count, then most recent occurrence, then smaller entity id.
    ``k=None`` disables truncation.
    """
    subj = np.asarray(subj, dtype=np.int64)
    n = subj.shape[0]
    if n == 0:
        return np.zeros(0, dtype=bool)
    key = subj * num_relations + np.asarray(rel, dtype=np.int64)
    obj = np.asarray(obj, dtype=np.int64)
    t = np.asarray(t, dtype=np.int64)
    order = np.lexsort((t, key))
    key_s, obj_s, t_s = key[order], obj[order], t[order]
    pairs, slot = np.unique(key_s * num_entities + obj_s, return_inverse=True)
    slot = slot.reshape(-1).astype(np.int64)
    pair_key = pairs // num_entities
    slot_lo = np.searchsorted(pair_key, key_s, side="left").astype(np.int64)
    slot_hi = np.searchsorted(pair_key, key_s, side="right").astype(np.int64)
    slot_obj = (pairs % num_entities).astype(np.int64)
    kk = 0 if k is None else int(k)
    if k is not None and kk <= 0:
        raise ValueError("k must be positive (or None for no truncation)")
    flags = _backend(backend).repeating_mask(
        np.ascontiguousarray(key_s),
        np.ascontiguousarray(obj_s),
        np.ascontiguousarray(t_s),
        np.ascontiguousarray(slot),
        slot_lo,
        slot_hi,
        slot_obj,
        int(pairs.shape[0]),
        kk,
    )
    out = np.zeros(n, dtype=bool)
    out[order] = np.asarray(flags, dtype=bool)
    return out


def filtered_ranks(
    scores: np.ndarray,
    truth: np.ndarray,
    filt_ptr: np.ndarray,
    filt_idx: np.ndarray,
    backend: str | None = None,
) -> np.ndarray:
    """Rank of each row's true entity: 1 + number of unfiltered entities scoring strictly higher.

    Row ``i`` filters the entities ``filt_idx[filt_ptr[i]:filt_ptr[i+1]]``
    (must be unique within a row); the truth itself is never filtered.
    """
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    truth = np.ascontiguousarray(truth, dtype=np.int64)
    if scores.ndim != 2 or scores.shape[0] != truth.shape[0]:
        raise ValueError("scores must be (queries, entities) and match truth length")
    if truth.size and (truth.min() < 0 or truth.max() >= scores.shape[1]):
        raise ValueError("truth entity outside the entity universe")
    return _backend(backend).filtered_ranks(
        scores,
        truth,
        np.ascontiguousarray(filt_ptr, dtype=np.int64),
        np.ascontiguousarray(filt_idx, dtype=np.int64),
    )
