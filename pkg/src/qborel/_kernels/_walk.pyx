# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled recurrence-walk kernel (see _walk_py for the reference version)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def windowed_walk(coeffs, rhs, seed):
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] c = \
        np.ascontiguousarray(coeffs, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1, mode="c"] r = \
        np.ascontiguousarray(rhs, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1, mode="c"] s = \
        np.ascontiguousarray(seed, dtype=np.complex128)
    cdef Py_ssize_t T = c.shape[0]
    cdef Py_ssize_t I = c.shape[1] - 1
    cdef Py_ssize_t nseed = s.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1, mode="c"] out = \
        np.empty(T, dtype=np.complex128)
    cdef Py_ssize_t t, i
    cdef double complex acc, lead
    for t in range(nseed):
        out[t] = s[t]
    for t in range(nseed, T):
        acc = r[t]
        for i in range(1, I + 1):
            if t - i >= 0:
                acc = acc - c[t, i] * out[t - i]
        lead = c[t, 0]
        if lead == 0:
            raise ZeroDivisionError(f"vanishing leading factor at step {t}")
        out[t] = acc / lead
    return out
