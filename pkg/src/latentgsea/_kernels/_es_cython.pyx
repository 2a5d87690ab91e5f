# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled enrichment-score kernels.

Same contract as ``_es_numpy`` (see its module docstring); this version is a
plain C scan per draw.  Floating-point operations are performed in the exact
order of the numpy fallback so both backends return bit-identical results.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef inline double _scan_one(const double* w, const long long* hits,
                             Py_ssize_t n, Py_ssize_t k,
                             double wsum, double miss,
                             Py_ssize_t* ext_out) nogil:
    cdef double s = 0.0
    cdef double mx = -1e308
    cdef double mn = 1e308
    cdef Py_ssize_t argmx = 0
    cdef Py_ssize_t argmn = 0
    cdef Py_ssize_t i, j = 0
    for i in range(n):
        if j < k and hits[j] == i:
            if wsum > 0.0:
                s = s + w[i] / wsum
            else:
                s = s + 1.0 / k
            j += 1
        else:
            s = s + miss
        if s > mx:
            mx = s
            argmx = i
        if s < mn:
            mn = s
            argmn = i
    if (mx if mx >= 0.0 else -mx) > (mn if mn >= 0.0 else -mn):
        ext_out[0] = argmx
        return mx
    ext_out[0] = argmn
    return mn


cdef inline double _hit_weight_sum(const double* w, const long long* hits,
                                   Py_ssize_t k) nogil:
    # Sequential order matches np.cumsum(...)[-1] in the fallback.
    cdef double acc = 0.0
    cdef Py_ssize_t j
    for j in range(k):
        acc = acc + w[hits[j]]
    return acc


def enrichment_scan(weights, hit_idx):
    """Running-sum enrichment score for one gene set: ``(es, extremum_index)``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] h = np.ascontiguousarray(hit_idx, dtype=np.int64)
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t k = h.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= hits < list length, got {k} of {n}")
    cdef double wsum = _hit_weight_sum(&w[0], <const long long*> &h[0], k)
    cdef double miss = -1.0 / (n - k)
    cdef Py_ssize_t ext = 0
    cdef double es = _scan_one(&w[0], <const long long*> &h[0], n, k, wsum, miss, &ext)
    return es, int(ext)


def enrichment_scan_batch(weights, hit_idx, chunk=256):
    """Enrichment scores for many same-size sets; ``chunk`` is ignored here."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] h = np.ascontiguousarray(hit_idx, dtype=np.int64)
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t n_draws = h.shape[0]
    cdef Py_ssize_t k = h.shape[1]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= set size < list length, got {k} of {n}")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n_draws)
    cdef double miss = -1.0 / (n - k)
    cdef double wsum
    cdef Py_ssize_t r, ext
    with nogil:
        for r in range(n_draws):
            wsum = _hit_weight_sum(&w[0], <const long long*> &h[r, 0], k)
            out[r] = _scan_one(&w[0], <const long long*> &h[r, 0], n, k, wsum, miss, &ext)
    return out
