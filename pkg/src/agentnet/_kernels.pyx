# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled similarity kernels.

Same contract as ``_kernels_py``: zero-norm vectors have cosine 0 against
everything, and a single-row matrix reports -1.0 max pairwise cosine.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def cosine(a, b):
    """Cosine similarity of two 1-d vectors, 0.0 if either has zero norm."""
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t i, d = av.shape[0]
    cdef double dot = 0.0, na = 0.0, nb = 0.0
    for i in range(d):
        dot += av[i] * bv[i]
        na += av[i] * av[i]
        nb += bv[i] * bv[i]
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (sqrt(na) * sqrt(nb))


def cosine_scores(query, matrix):
    """Cosine similarity of ``query`` against every row of ``matrix``."""
    cdef double[::1] q = np.ascontiguousarray(query, dtype=np.float64)
    cdef double[:, ::1] m = np.ascontiguousarray(matrix, dtype=np.float64)
    cdef Py_ssize_t n = m.shape[0], d = m.shape[1]
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double qn = 0.0, dot, rn
    for j in range(d):
        qn += q[j] * q[j]
    if qn == 0.0 or n == 0:
        return out_arr
    qn = sqrt(qn)
    for i in range(n):
        dot = 0.0
        rn = 0.0
        for j in range(d):
            dot += m[i, j] * q[j]
            rn += m[i, j] * m[i, j]
        if rn > 0.0:
            out[i] = dot / (sqrt(rn) * qn)
    return out_arr


def pairwise_max_cosine(matrix):
    """For each row, the maximum cosine similarity to any other row."""
    cdef double[:, ::1] m = np.ascontiguousarray(matrix, dtype=np.float64)
    cdef Py_ssize_t n = m.shape[0], d = m.shape[1]
    if n == 0:
        return np.zeros(0, dtype=np.float64)
    out_arr = np.full(n, -1.0, dtype=np.float64)
    if n == 1:
        return out_arr
    cdef double[::1] out = out_arr
    norms_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] norms = norms_arr
    cdef Py_ssize_t i, k, j
    cdef double acc, sim
    for i in range(n):
        acc = 0.0
        for j in range(d):
            acc += m[i, j] * m[i, j]
        norms[i] = sqrt(acc)
    for i in range(n):
        for k in range(i + 1, n):
            if norms[i] == 0.0 or norms[k] == 0.0:
                sim = 0.0
            else:
                acc = 0.0
                for j in range(d):
                    acc += m[i, j] * m[k, j]
                sim = acc / (norms[i] * norms[k])
            if sim > out[i]:
                out[i] = sim
            if sim > out[k]:
                out[k] = sim
    return out_arr
