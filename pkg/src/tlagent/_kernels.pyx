# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; see _kernels_py.py for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.string cimport memset

cnp.import_array()


def forward(const int[:, ::1] delta, int start, const double[:, ::1] probs):
    cdef Py_ssize_t Q = delta.shape[0], A = delta.shape[1], T = probs.shape[0]
    cdef Py_ssize_t t, q, a
    cdef double m, total
    dist_arr = np.zeros(Q)
    nxt_arr = np.zeros(Q)
    masses_arr = np.empty(T)
    cdef double[::1] dist = dist_arr
    cdef double[::1] nxt = nxt_arr
    cdef double[::1] masses = masses_arr
    cdef double[::1] tmp
    dist[start] = 1.0
    for t in range(T):
        memset(&nxt[0], 0, Q * sizeof(double))
        for q in range(Q):
            m = dist[q]
            if m == 0.0:
                continue
            for a in range(A):
                nxt[delta[q, a]] += m * probs[t, a]
        total = 0.0
        for q in range(Q):
            total += nxt[q]
        masses[t] = total
        tmp = dist
        dist = nxt
        nxt = tmp
    return np.asarray(dist).copy(), masses_arr


cdef bint _accepts_from(const int[:, ::1] delta, const unsigned char[::1] accepting,
                        const unsigned char[::1] live, int state, const int[::1] letters,
                        Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(lo, hi + 1):
        if not live[state]:
            return False
        state = delta[state, letters[k]]
    return accepting[state] != 0


def boolean_spans(const int[:, ::1] delta, const unsigned char[::1] accepting,
                  const unsigned char[::1] live, int start, const int[::1] letters,
                  Py_ssize_t max_window):
    cdef Py_ssize_t T = letters.shape[0], A = delta.shape[1]
    cdef Py_ssize_t i, j, last, n_alt = 0, k, n_out = 0
    cdef int q, actual, s
    alt_list = sorted(set(np.asarray(delta[start]).tolist()))
    alt_arr = np.array(alt_list, dtype=np.intc)
    cdef int[::1] alts = alt_arr
    n_alt = alts.shape[0]
    starts_arr = np.empty(T, dtype=np.int64)
    ends_arr = np.empty(T, dtype=np.int64)
    cdef long long[::1] starts = starts_arr
    cdef long long[::1] ends = ends_arr
    with nogil:
        for i in range(T):
            q = start
            last = i + max_window
            if last > T:
                last = T
            for j in range(i, last):
                q = delta[q, letters[j]]
                if accepting[q]:
                    actual = delta[start, letters[i]]
                    for k in range(n_alt):
                        s = alts[k]
                        if s != actual and not _accepts_from(delta, accepting, live, s,
                                                             letters, i + 1, j):
                            starts[n_out] = i
                            ends[n_out] = j
                            n_out += 1
                            break
                    break
                if not live[q]:
                    break
    return starts_arr[:n_out].copy(), ends_arr[:n_out].copy()


cdef void _step(const int[:, ::1] delta, const double[:, ::1] probs, Py_ssize_t t,
                double[::1] src, double[::1] dst) noexcept nogil:
    cdef Py_ssize_t Q = delta.shape[0], A = delta.shape[1], q, a
    cdef double m
    memset(&dst[0], 0, Q * sizeof(double))
    for q in range(Q):
        m = src[q]
        if m == 0.0:
            continue
        for a in range(A):
            dst[delta[q, a]] += m * probs[t, a]


cdef double _masked_sum(double[::1] dist, const unsigned char[::1] mask) noexcept nogil:
    cdef Py_ssize_t q
    cdef double total = 0.0
    for q in range(dist.shape[0]):
        if mask[q]:
            total += dist[q]
    return total


def prob_spans(const int[:, ::1] delta, const unsigned char[::1] accepting,
               const unsigned char[::1] live, int start, const double[:, ::1] probs,
               Py_ssize_t max_window, double rho):
    cdef Py_ssize_t Q = delta.shape[0], T = probs.shape[0]
    cdef Py_ssize_t i, j, k, last, n_alt, a_i, n_out = 0
    cdef double acc
    alt_arr = np.array(sorted(set(np.asarray(delta[start]).tolist())), dtype=np.intc)
    cdef int[::1] alts = alt_arr
    n_alt = alts.shape[0]
    cdef double[::1] dist = np.zeros(Q)
    cdef double[::1] nxt = np.zeros(Q)
    cdef double[::1] alt = np.zeros(Q)
    cdef double[::1] alt_nxt = np.zeros(Q)
    cdef double[::1] tmp
    starts_arr = np.empty(T, dtype=np.int64)
    ends_arr = np.empty(T, dtype=np.int64)
    values_arr = np.empty(T, dtype=np.float64)
    cdef long long[::1] starts = starts_arr
    cdef long long[::1] ends = ends_arr
    cdef double[::1] values = values_arr
    with nogil:
        for i in range(T):
            memset(&dist[0], 0, Q * sizeof(double))
            dist[start] = 1.0
            last = i + max_window
            if last > T:
                last = T
            for j in range(i, last):
                _step(delta, probs, j, dist, nxt)
                tmp = dist
                dist = nxt
                nxt = tmp
                acc = _masked_sum(dist, accepting)
                if acc >= rho:
                    for a_i in range(n_alt):
                        memset(&alt[0], 0, Q * sizeof(double))
                        alt[alts[a_i]] = 1.0
                        for k in range(i + 1, j + 1):
                            _step(delta, probs, k, alt, alt_nxt)
                            tmp = alt
                            alt = alt_nxt
                            alt_nxt = tmp
                        if _masked_sum(alt, accepting) < rho:
                            starts[n_out] = i
                            ends[n_out] = j
                            values[n_out] = acc
                            n_out += 1
                            break
                    break
                if _masked_sum(dist, live) < rho - 1e-12:
                    break
    return starts_arr[:n_out].copy(), ends_arr[:n_out].copy(), values_arr[:n_out].copy()
