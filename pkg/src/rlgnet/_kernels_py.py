"""Pure-Python/numpy versions of the hot loops in ``_kernels.pyx``.

Both modules expose the same functions with the same argument layout; see
``rlgnet.kernels`` for the selection logic and the argument preparation.
"""
import numpy as np


def repeating_mask(key, obj, t, slot, slot_lo, slot_hi, slot_obj, num_slots, k):
    """Flag facts whose object is among the top-k historical candidates of their key.

    Facts must be sorted by (key, t). ``slot`` maps each fact to its
    (key, object) pair; the pairs of one key occupy ``[slot_lo, slot_hi)``.
    ``k <= 0`` means no truncation.
    """
    n = key.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    count = np.zeros(num_slots, dtype=np.int64)
    last = np.full(num_slots, -1, dtype=np.int64)
    i = 0
    while i < n:
        j = i + 1
        while j < n and key[j] == key[i] and t[j] == t[i]:
            j += 1
        lo, hi = slot_lo[i], slot_hi[i]
        c_blk = count[lo:hi]
        l_blk = last[lo:hi]
        o_blk = slot_obj[lo:hi]
        for f in range(i, j):
            p = slot[f]
            c = count[p]
            if c == 0:
                continue
            if k <= 0:
                out[f] = 1
                continue
            better = (c_blk > c) | (
                (c_blk == c) & ((l_blk > last[p]) | ((l_blk == last[p]) & (o_blk < slot_obj[p])))
            )
            if int(better.sum()) < k:
                out[f] = 1
        for f in range(i, j):
            p = slot[f]
            count[p] += 1
            last[p] = t[f]
        i = j
    return out


def filtered_ranks(scores, truth, filt_ptr, filt_idx):
    """Optimistic rank of ``truth`` per row, ignoring the filtered entities of that row."""
    q = scores.shape[0]
    target = scores[np.arange(q), truth]
    ranks = 1 + (scores > target[:, None]).sum(axis=1)
    for i in range(q):
        cols = filt_idx[filt_ptr[i]:filt_ptr[i + 1]]
        cols = cols[cols != truth[i]]
        if cols.size:
            ranks[i] -= int((scores[i, cols] > target[i]).sum())
    return ranks.astype(np.int64)
