# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled patch kernels: windowed kNN scan, group gather, scatter-add.

Drop-in replacement for gsrc.kernels._numpy with identical contracts.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def knn_batch(double[:, ::1] target, cnp.int64_t[::1] ex_rows, cnp.int64_t[::1] ex_cols,
              int b_side, int window, int k):
    """See gsrc.kernels._numpy.knn_batch."""
    cdef Py_ssize_t h = target.shape[0]
    cdef Py_ssize_t w = target.shape[1]
    cdef Py_ssize_t max_r = h - b_side
    cdef Py_ssize_t max_c = w - b_side
    cdef Py_ssize_t lo = (window - 1) // 2
    cdef Py_ssize_t hi = window // 2
    cdef Py_ssize_t n = ex_rows.shape[0]

    out_r_arr = np.empty((n, k), dtype=np.int64)
    out_c_arr = np.empty((n, k), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out_r = out_r_arr
    cdef cnp.int64_t[:, ::1] out_c = out_c_arr

    cand_d_arr = np.empty(window * window, dtype=np.float64)
    cand_r_arr = np.empty(window * window, dtype=np.int64)
    cand_c_arr = np.empty(window * window, dtype=np.int64)
    cdef double[::1] cand_d = cand_d_arr
    cdef cnp.int64_t[::1] cand_r = cand_r_arr
    cdef cnp.int64_t[::1] cand_c = cand_c_arr

    cdef Py_ssize_t i, er, ec, r0, r1, c0, c1, cr, cc, br, bc, m, j, t
    cdef double dist, dv
    cdef cnp.int64_t[::1] order

    for i in range(n):
        er = ex_rows[i]
        ec = ex_cols[i]
        r0 = er - lo
        if r0 < 0:
            r0 = 0
        r1 = er + hi
        if r1 > max_r:
            r1 = max_r
        c0 = ec - lo
        if c0 < 0:
            c0 = 0
        c1 = ec + hi
        if c1 > max_c:
            c1 = max_c
        m = 0
        with nogil:
            for cr in range(r0, r1 + 1):
                for cc in range(c0, c1 + 1):
                    if cr == er and cc == ec:
                        continue  # exemplar is pinned to slot 0
                    dist = 0.0
                    for br in range(b_side):
                        for bc in range(b_side):
                            dv = target[cr + br, cc + bc] - target[er + br, ec + bc]
                            dist += dv * dv
                    cand_d[m] = dist
                    cand_r[m] = cr
                    cand_c[m] = cc
                    m += 1
        # last lexsort key is primary: distance, then row, then col
        order = np.lexsort((cand_c_arr[:m], cand_r_arr[:m], cand_d_arr[:m]))
        out_r[i, 0] = er
        out_c[i, 0] = ec
        for j in range(1, k):
            t = j % (m + 1)
            if t == 0:
                out_r[i, j] = er
                out_c[i, j] = ec
            else:
                out_r[i, j] = cand_r[order[t - 1]]
                out_c[i, j] = cand_c[order[t - 1]]
    return out_r_arr, out_c_arr


def gather_groups(double[:, ::1] source, cnp.int64_t[:, ::1] rows, cnp.int64_t[:, ::1] cols,
                  int b_side):
    """See gsrc.kernels._numpy.gather_groups."""
    cdef Py_ssize_t n = rows.shape[0]
    cdef Py_ssize_t k = rows.shape[1]
    cdef Py_ssize_t b = b_side * b_side
    out_arr = np.empty((n, b, k), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, br, bc, r, c
    with nogil:
        for i in range(n):
            for j in range(k):
                r = rows[i, j]
                c = cols[i, j]
                for bc in range(b_side):
                    for br in range(b_side):
                        out[i, bc * b_side + br, j] = source[r + br, c + bc]
    return out_arr


def scatter_groups(double[:, ::1] vals, double[:, ::1] cnts, cnp.int64_t[:, ::1] rows,
                   cnp.int64_t[:, ::1] cols, int b_side, double[:, :, ::1] patches):
    """See gsrc.kernels._numpy.scatter_groups.

    Accumulation runs in (member, pixel-offset) order, matching the
    fallback backend bit for bit on identical inputs.
    """
    cdef Py_ssize_t n = rows.shape[0]
    cdef Py_ssize_t k = rows.shape[1]
    cdef Py_ssize_t i, j, br, bc, r, c
    with nogil:
        for i in range(n):
            for j in range(k):
                r = rows[i, j]
                c = cols[i, j]
                for bc in range(b_side):
                    for br in range(b_side):
                        vals[r + br, c + bc] += patches[i, bc * b_side + br, j]
                        cnts[r + br, c + bc] += 1.0
