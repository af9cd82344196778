# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled MI kernels; same contracts as ``_pykernels``."""
import math

import numpy as np
cimport numpy as cnp
from libc.math cimport log
from libc.stdlib cimport calloc, free

cnp.import_array()

BACKEND = "cython"


cdef double _mi_counts(const Py_ssize_t* joint, const Py_ssize_t* cx,
                       const Py_ssize_t* cy, Py_ssize_t nb, Py_ssize_t n) nogil:
    cdef Py_ssize_t k, l, c
    cdef double acc = 0.0
    cdef double dn = <double>n
    for k in range(nb):
        if cx[k] == 0:
            continue
        for l in range(nb):
            c = joint[k * nb + l]
            if c > 0:
                acc += c * log(dn * c / (<double>cx[k] * <double>cy[l]))
    return acc / dn


def joint_mi(const Py_ssize_t[::1] bx, const Py_ssize_t[::1] by, Py_ssize_t nb):
    """Observed MI; terms are summed exactly so swapping ``bx`` and ``by`` gives the same bits."""
    cdef Py_ssize_t n = bx.shape[0], t, k, l, c
    cdef double dn = <double>n
    cdef Py_ssize_t* joint = <Py_ssize_t*>calloc(nb * nb, sizeof(Py_ssize_t))
    cdef Py_ssize_t* cx = <Py_ssize_t*>calloc(nb, sizeof(Py_ssize_t))
    cdef Py_ssize_t* cy = <Py_ssize_t*>calloc(nb, sizeof(Py_ssize_t))
    if joint == NULL or cx == NULL or cy == NULL:
        free(joint); free(cx); free(cy)
        raise MemoryError()
    with nogil:
        for t in range(n):
            joint[bx[t] * nb + by[t]] += 1
            cx[bx[t]] += 1
            cy[by[t]] += 1
    terms = []
    for k in range(nb):
        for l in range(nb):
            c = joint[k * nb + l]
            if c > 0:
                terms.append(c * log(dn * c / (<double>cx[k] * <double>cy[l])))
    free(joint); free(cx); free(cy)
    return math.fsum(terms) / dn


def perm_mi(const Py_ssize_t[::1] bx, const Py_ssize_t[::1] by, Py_ssize_t nb,
            const Py_ssize_t[:, ::1] perms):
    """MI of ``(bx[perm], by)`` for every row ``perm`` of ``perms``."""
    cdef Py_ssize_t n = bx.shape[0], n_perm = perms.shape[0], t, k, i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.empty(n_perm)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t* joint = <Py_ssize_t*>calloc(nb * nb, sizeof(Py_ssize_t))
    cdef Py_ssize_t* cx = <Py_ssize_t*>calloc(nb, sizeof(Py_ssize_t))
    cdef Py_ssize_t* cy = <Py_ssize_t*>calloc(nb, sizeof(Py_ssize_t))
    if joint == NULL or cx == NULL or cy == NULL:
        free(joint); free(cx); free(cy)
        raise MemoryError()
    with nogil:
        for t in range(n):
            cx[bx[t]] += 1
            cy[by[t]] += 1
        for k in range(n_perm):
            for i in range(nb * nb):
                joint[i] = 0
            for t in range(n):
                joint[bx[perms[k, t]] * nb + by[t]] += 1
            out[k] = _mi_counts(joint, cx, cy, nb, n)
    free(joint); free(cx); free(cy)
    return out_arr


def fisher_yates(const double[:, ::1] u):
    """One Fisher-Yates permutation of ``range(n)`` per row of uniforms ``u`` (shape ``(rows, n - 1)``).

    Step ``i`` (from ``n - 1`` down to 1) swaps position ``i`` with
    ``floor(u[row, n - 1 - i] * (i + 1))``.
    """
    cdef Py_ssize_t rows = u.shape[0], n = u.shape[1] + 1, r, i, j, tmp
    cdef cnp.ndarray[cnp.intp_t, ndim=2] out_arr = np.empty((rows, n), dtype=np.intp)
    cdef Py_ssize_t[:, ::1] out = out_arr
    with nogil:
        for r in range(rows):
            for i in range(n):
                out[r, i] = i
            for i in range(n - 1, 0, -1):
                j = <Py_ssize_t>(u[r, n - 1 - i] * (i + 1))
                if j > i:
                    j = i
                tmp = out[r, i]
                out[r, i] = out[r, j]
                out[r, j] = tmp
    return out_arr
