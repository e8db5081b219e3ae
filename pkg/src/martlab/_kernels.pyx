# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_fallback``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, uint8_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t mix(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t raw(uint64_t key, uint64_t counter) nogil:
    return mix(key + (counter + 1) * GOLDEN)


def uniforms(uint64_t key, uint64_t start, Py_ssize_t n):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] = <double>(raw(key, start + i) >> 11) * 1.1102230246251565e-16 + 5.551115123125783e-17
    return out


def walk_hit_mc(uint64_t key, uint64_t start, Py_ssize_t n, int64_t horizon, int64_t level, int64_t initial):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] xs = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] hit = np.empty(n, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] taus = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t i
    cdef int64_t j, x, tau
    cdef uint64_t base
    with nogil:
        for i in range(n):
            x = initial
            tau = horizon
            base = (start + <uint64_t>i) << 32
            if x >= level:
                tau = 0
            else:
                for j in range(horizon):
                    if (raw(key, base + <uint64_t>j) >> 63) == 0:
                        x += 1
                    else:
                        x -= 1
                    if x >= level:
                        tau = j + 1
                        break
            xs[i] = x
            hit[i] = 1 if x >= level else 0
            taus[i] = tau
    return xs, hit, taus


def lattice_dp(int64_t initial, int64_t horizon, int64_t[:] kind, int64_t[:] level,
               int64_t[:] kmin, uint8_t[:] ok_h, uint8_t[:] root_table):
    cdef Py_ssize_t n_leaves = kind.shape[0]
    cdef Py_ssize_t n_masks = 1 << n_leaves
    cdef Py_ssize_t width = 2 * horizon + 1
    cdef cnp.ndarray[cnp.float64_t, ndim=2] live_a = np.zeros((n_masks, width))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] nxt_a = np.zeros((n_masks, width))
    cdef double[:, :] live = live_a
    cdef double[:, :] nxt = nxt_a
    cdef double[:, :] tmp
    cdef cnp.ndarray[cnp.float64_t, ndim=1] stopped_a = np.zeros(width)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] by_k_a = np.zeros(horizon + 1)
    cdef double[:] stopped = stopped_a
    cdef double[:] by_k = by_k_a
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] active_a = np.zeros(n_masks, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] nact_a = np.zeros(n_masks, dtype=np.uint8)
    cdef uint8_t[:] active = active_a
    cdef uint8_t[:] nact = nact_a
    cdef uint8_t[:] swp
    cdef Py_ssize_t k, mask, nm, i, lo, hi, j
    cdef int64_t x, ax
    cdef double p, acc
    cdef bint t_ok, f
    live[0, horizon] = 1.0
    active[0] = 1
    with nogil:
        for k in range(horizon + 1):
            lo = horizon - k
            hi = horizon + k + 1
            for mask in range(n_masks):
                nact[mask] = 0
                for i in range(lo - 1 if lo > 0 else 0, hi + 1 if hi < width else width):
                    nxt[mask, i] = 0.0
            acc = 0.0
            for mask in range(n_masks):
                if not active[mask]:
                    continue
                for i in range(lo, hi):
                    p = live[mask, i]
                    if p == 0.0:
                        continue
                    x = initial - horizon + i
                    ax = x if x >= 0 else -x
                    nm = mask
                    for j in range(n_leaves):
                        if (mask >> j) & 1:
                            continue
                        if k == horizon:
                            t_ok = ok_h[j] != 0
                        else:
                            t_ok = k >= kmin[j]
                        if not t_ok:
                            continue
                        if kind[j] == 0:
                            f = True
                        elif kind[j] == 1:
                            f = x >= level[j]
                        elif kind[j] == 2:
                            f = ax >= level[j]
                        else:
                            f = ax <= level[j]
                        if f:
                            nm = nm | (1 << j)
                    if root_table[nm]:
                        stopped[i] += p
                        acc += p
                    else:
                        nxt[nm, i] += p
                        nact[nm] = 1
            by_k[k] = acc
            if k == horizon:
                tmp = live
                live = nxt
                nxt = tmp
                swp = active
                active = nact
                nact = swp
                break
            # diffuse: live <- shift(nxt)
            for mask in range(n_masks):
                for i in range(lo - 1, hi + 1):
                    live[mask, i] = 0.0
                if not nact[mask]:
                    continue
                for i in range(lo, hi):
                    p = nxt[mask, i]
                    if p != 0.0:
                        live[mask, i + 1] += 0.5 * p
                        live[mask, i - 1] += 0.5 * p
            swp = active
            active = nact
            nact = swp
    unstopped = np.zeros(width)
    for mask in range(n_masks):
        if active[mask]:
            unstopped += np.asarray(live[mask])
    return stopped_a, unstopped, by_k_a


def floor_sum(int64_t m):
    cdef int64_t k, total = 0
    with nogil:
        for k in range(1, m + 1):
            total += (2 * m) // (2 * k - 1)
    return total
