# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled chromosome decoder and population fitness.

Mirrors ``_decode_py`` exactly, including the floating-point order of the
fitness sum, so both backends yield identical GA trajectories.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef inline bint _before(long long pa, long long aa, Py_ssize_t ka,
                         long long pb, long long ab, Py_ssize_t kb) noexcept nogil:
    if pa != pb:
        return pa < pb
    if aa != ab:
        return aa < ab
    return ka < kb


cdef void _decode_c(const unsigned char[:] genes, const long long[:] arrival,
                    const long long[:] proc, const long long[:] deadline,
                    int m, int bits, long long* cpu_out, long long* start_out,
                    Py_ssize_t* order, Py_ssize_t* offsets, Py_ssize_t* pool,
                    long long* codes) noexcept nogil:
    cdef Py_ssize_t n = arrival.shape[0]
    cdef Py_ssize_t k, q, b, j, lo, hi, ptr, npool, keep, best
    cdef long long code, now, s
    cdef bint started
    cdef int rule = genes[n * bits]

    for j in range(m + 2):
        offsets[j] = 0
    for k in range(n):
        code = 0
        for b in range(bits):
            code = (code << 1) | genes[k * bits + b]
        if code > m:
            code = 0
        codes[k] = code
        cpu_out[k] = 0
        start_out[k] = 0
        offsets[code + 1] += 1
    for j in range(1, m + 2):
        offsets[j] += offsets[j - 1]
    # counting sort keeps arrival order within each cpu bucket
    for j in range(m + 1):
        pool[j] = offsets[j]
    for k in range(n):
        order[pool[codes[k]]] = k
        pool[codes[k]] += 1

    for j in range(1, m + 1):
        lo = offsets[j]
        hi = offsets[j + 1]
        if lo == hi:
            continue
        if rule == 0:
            started = False
            now = 0
            for q in range(lo, hi):
                k = order[q]
                s = arrival[k] if (not started or now < arrival[k]) else now
                if s + proc[k] <= deadline[k]:
                    cpu_out[k] = j
                    start_out[k] = s
                    now = s + proc[k]
                    started = True
            continue

        npool = 0
        ptr = lo
        started = False
        now = 0
        while True:
            if npool == 0:
                if ptr >= hi:
                    break
                if not started or now < arrival[order[ptr]]:
                    now = arrival[order[ptr]]
                    started = True
            while ptr < hi and arrival[order[ptr]] <= now:
                pool[npool] = order[ptr]
                npool += 1
                ptr += 1
            keep = 0
            for q in range(npool):
                k = pool[q]
                if deadline[k] - proc[k] >= now:
                    pool[keep] = k
                    keep += 1
            npool = keep
            if npool == 0:
                continue
            best = 0
            for q in range(1, npool):
                if _before(proc[pool[q]], arrival[pool[q]], pool[q],
                           proc[pool[best]], arrival[pool[best]], pool[best]):
                    best = q
            k = pool[best]
            for q in range(best, npool - 1):
                pool[q] = pool[q + 1]
            npool -= 1
            cpu_out[k] = j
            start_out[k] = now
            now += proc[k]


def decode_one(genes, arrival, proc, deadline, int m, int bits):
    """Return ``(cpu, start)`` arrays; ``cpu[k] == 0`` marks a dropped task."""
    cdef const unsigned char[:] g = np.ascontiguousarray(genes, dtype=np.uint8)
    cdef const long long[:] a = np.ascontiguousarray(arrival, dtype=np.int64)
    cdef const long long[:] p = np.ascontiguousarray(proc, dtype=np.int64)
    cdef const long long[:] d = np.ascontiguousarray(deadline, dtype=np.int64)
    cdef Py_ssize_t n = a.shape[0]
    cpu = np.zeros(n, dtype=np.int64)
    start = np.zeros(n, dtype=np.int64)
    cdef long long[:] cv = cpu
    cdef long long[:] sv = start
    cdef Py_ssize_t* order = <Py_ssize_t*> malloc((n + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t* offsets = <Py_ssize_t*> malloc((m + 2) * sizeof(Py_ssize_t))
    cdef Py_ssize_t* pool = <Py_ssize_t*> malloc((n + m + 2) * sizeof(Py_ssize_t))
    cdef long long* codes = <long long*> malloc((n + 1) * sizeof(long long))
    try:
        if n > 0:
            _decode_c(g, a, p, d, m, bits, &cv[0], &sv[0], order, offsets, pool, codes)
    finally:
        free(order)
        free(offsets)
        free(pool)
        free(codes)
    return cpu, start


def evaluate_population(pop, arrival, proc, deadline, int m, int bits, double lam):
    """Objective value of every chromosome (row) in ``pop``."""
    cdef const unsigned char[:, :] g = np.ascontiguousarray(pop, dtype=np.uint8)
    cdef const long long[:] a = np.ascontiguousarray(arrival, dtype=np.int64)
    cdef const long long[:] p = np.ascontiguousarray(proc, dtype=np.int64)
    cdef const long long[:] d = np.ascontiguousarray(deadline, dtype=np.int64)
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t rows = g.shape[0]
    out = np.empty(rows, dtype=np.float64)
    cdef double[:] ov = out
    cdef long long* cpu = <long long*> malloc((n + 1) * sizeof(long long))
    cdef long long* start = <long long*> malloc((n + 1) * sizeof(long long))
    cdef Py_ssize_t* order = <Py_ssize_t*> malloc((n + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t* offsets = <Py_ssize_t*> malloc((m + 2) * sizeof(Py_ssize_t))
    cdef Py_ssize_t* pool = <Py_ssize_t*> malloc((n + m + 2) * sizeof(Py_ssize_t))
    cdef long long* codes = <long long*> malloc((n + 1) * sizeof(long long))
    cdef Py_ssize_t r, k
    cdef double total
    cdef long long dropped, slack
    try:
        with nogil:
            for r in range(rows):
                _decode_c(g[r], a, p, d, m, bits, cpu, start, order, offsets, pool, codes)
                total = 0.0
                dropped = 0
                for k in range(n):
                    if cpu[k] == 0:
                        dropped += 1
                    else:
                        slack = d[k] - a[k] - p[k]
                        if slack > 0:
                            total += <double>(start[k] - a[k]) / <double>slack
                ov[r] = lam * total + (1.0 - lam) * dropped / n
    finally:
        free(cpu)
        free(start)
        free(order)
        free(offsets)
        free(pool)
        free(codes)
    return out
