# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the repeating-fact scan and the filtered ranking."""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def repeating_mask(const cnp.int64_t[::1] key, const cnp.int64_t[::1] obj,
                   const cnp.int64_t[::1] t, const cnp.int64_t[::1] slot,
                   const cnp.int64_t[::1] slot_lo, const cnp.int64_t[::1] slot_hi,
                   const cnp.int64_t[::1] slot_obj, Py_ssize_t num_slots,
                   long long k):
    cdef Py_ssize_t n = key.shape[0]
    out_arr = np.zeros(n, dtype=np.uint8)
    count_arr = np.zeros(num_slots, dtype=np.int64)
    last_arr = np.full(num_slots, -1, dtype=np.int64)
    cdef cnp.uint8_t[::1] out = out_arr
    cdef cnp.int64_t[::1] count = count_arr
    cdef cnp.int64_t[::1] last = last_arr
    cdef Py_ssize_t i = 0, j, f, q, p, lo, hi
    cdef cnp.int64_t c, lp, op
    cdef long long better
    with nogil:
        while i < n:
            j = i + 1
            while j < n and key[j] == key[i] and t[j] == t[i]:
                j += 1
            lo = slot_lo[i]
            hi = slot_hi[i]
            for f in range(i, j):
                p = slot[f]
                c = count[p]
                if c == 0:
                    continue
                if k <= 0:
                    out[f] = 1
                    continue
                lp = last[p]
                op = slot_obj[p]
                better = 0
                for q in range(lo, hi):
                    if count[q] > c or (count[q] == c and (last[q] > lp or (last[q] == lp and slot_obj[q] < op))):
                        better += 1
                        if better >= k:
                            break
                if better < k:
                    out[f] = 1
            for f in range(i, j):
                p = slot[f]
                count[p] += 1
                last[p] = t[f]
            i = j
    return out_arr


def filtered_ranks(const double[:, ::1] scores, const cnp.int64_t[::1] truth,
                   const cnp.int64_t[::1] filt_ptr, const cnp.int64_t[::1] filt_idx):
    cdef Py_ssize_t nq = scores.shape[0], ne = scores.shape[1]
    ranks_arr = np.empty(nq, dtype=np.int64)
    cdef cnp.int64_t[::1] ranks = ranks_arr
    cdef Py_ssize_t i, e, a
    cdef double target
    cdef cnp.int64_t r, col
    with nogil:
        for i in range(nq):
            target = scores[i, truth[i]]
            r = 1
            for e in range(ne):
                if scores[i, e] > target:
                    r += 1
            for a in range(filt_ptr[i], filt_ptr[i + 1]):
                col = filt_idx[a]
                if col != truth[i] and scores[i, col] > target:
                    r -= 1
            ranks[i] = r
    return ranks_arr
