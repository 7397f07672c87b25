# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel for streaming privatised-indicator aggregation.

Consumes the bit generator's native double stream (one uniform per record and
cell, row-major) and counts the events ``W <= 0`` by threshold comparison, so
its counts are bit-for-bit identical to the numpy fallback and to the
record-materialising route.  Noise sums use the C library ``log``; they may
differ from the fallback's sums in the last ulp.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport log
from libc.stdint cimport int64_t

from numpy.random cimport bitgen_t

import numpy as np

cdef double SQRT2 = 1.4142135623730951
cdef double U_MIN = 1.1102230246251565e-16  # 2**-53


def privatized_cell_stats_raw(
    int64_t[::1] cell_pos,
    Py_ssize_t n_cells,
    double sigma,
    double t1,
    object bit_generator,
    long repeats,
    bint want_sums,
    int64_t[::1] counts,
    double[::1] sums,
):
    cdef const char *capsule_name = "BitGenerator"
    cdef bitgen_t *bg
    cdef Py_ssize_t i, j, n = cell_pos.shape[0]
    cdef long rep
    cdef int64_t p
    cdef double u, z, w

    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, capsule_name):
        raise ValueError("expected a BitGenerator capsule")
    bg = <bitgen_t *> PyCapsule_GetPointer(capsule, capsule_name)

    with bit_generator.lock, nogil:
        for rep in range(repeats):
            for i in range(n):
                p = cell_pos[i]
                for j in range(n_cells):
                    u = bg.next_double(bg.state)
                    if u <= (t1 if j == p else 0.5):
                        counts[j] += 1
                    if want_sums:
                        if u < U_MIN:
                            u = U_MIN
                        if u < 0.5:
                            z = log(2.0 * u) / SQRT2
                        else:
                            z = -log(2.0 - 2.0 * u) / SQRT2
                        w = sigma * z
                        if j == p:
                            w += 1.0
                        sums[j] += w
    return None
