# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for message-matrix algebra and exhaustive enumeration.

Every routine here has a numpy twin in ``_fallback`` that performs the same
floating-point operations in the same order, so both backends produce
bit-identical matrices (the enumeration kernel excepted, which is only held
to a tolerance).
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def propagate(const double[:, ::1] psi, const double[:, ::1] fused):
    cdef Py_ssize_t rows = psi.shape[0]
    cdef Py_ssize_t inner = psi.shape[1]
    cdef Py_ssize_t cols = fused.shape[1]
    cdef Py_ssize_t r, k, c
    cdef double acc
    if fused.shape[0] != inner:
        raise ValueError("shape mismatch in propagate")
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] o = out
    for r in range(rows):
        for c in range(cols):
            acc = psi[r, 0] * fused[0, c]
            for k in range(1, inner):
                acc = acc + psi[r, k] * fused[k, c]
            o[r, c] = acc
    return out


def sum_groups(const double[:, ::1] values, const cnp.int64_t[:, ::1] groups):
    cdef Py_ssize_t rows = values.shape[0]
    cdef Py_ssize_t ngroups = groups.shape[0]
    cdef Py_ssize_t cols = groups.shape[1]
    cdef Py_ssize_t r, g, c
    cdef double acc
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] o = out
    for r in range(rows):
        for c in range(cols):
            acc = values[r, groups[0, c]]
            for g in range(1, ngroups):
                acc = acc + values[r, groups[g, c]]
            o[r, c] = acc
    return out


def digit_permutation(Py_ssize_t n_digits, Py_ssize_t radix, perm):
    """Target column index for every source column index.

    ``perm[k]`` is the source digit position that lands at target position k.
    """
    cdef Py_ssize_t total = 1
    cdef Py_ssize_t i, k, c, rem
    for i in range(n_digits):
        total *= radix
    cdef cnp.int64_t[::1] p = np.asarray(perm, dtype=np.int64)
    out = np.empty(total, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    cdef cnp.int64_t[::1] digits = np.empty(max(n_digits, 1), dtype=np.int64)
    for c in range(total):
        rem = c
        for i in range(n_digits - 1, -1, -1):
            digits[i] = rem % radix
            rem = rem // radix
        rem = 0
        for k in range(n_digits):
            rem = rem * radix + digits[p[k]]
        o[c] = rem
    return out


def enumerate_beliefs(const double[:, ::1] phi,
                      const cnp.int64_t[::1] edge_u,
                      const cnp.int64_t[::1] edge_v,
                      const double[:, :, ::1] psi):
    cdef Py_ssize_t nv = phi.shape[0]
    cdef Py_ssize_t radix = phi.shape[1]
    cdef Py_ssize_t ne = edge_u.shape[0]
    cdef Py_ssize_t v, e, pos
    cdef double w
    out = np.zeros((nv, radix), dtype=np.float64)
    cdef double[:, ::1] z = out
    if nv == 0:
        return out
    cdef cnp.int64_t[::1] x = np.zeros(nv, dtype=np.int64)
    while True:
        w = 1.0
        for v in range(nv):
            w = w * phi[v, x[v]]
        for e in range(ne):
            w = w * psi[e, x[edge_u[e]], x[edge_v[e]]]
        for v in range(nv):
            z[v, x[v]] += w
        # odometer increment, last node fastest
        pos = nv - 1
        while pos >= 0:
            x[pos] += 1
            if x[pos] < radix:
                break
            x[pos] = 0
            pos -= 1
        if pos < 0:
            break
    return out
