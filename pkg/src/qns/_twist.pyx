# cython: boundscheck=False, wraparound=False, cdivision=True
# Compiled twisted-convolution kernel, d=2 specialization.
#
# out[k] = w * sum_l exp(i/2 (xi_k, theta xi_l)) x[k-l] y[l] over the
# symmetric lattice, with out-of-band x indices dropped (Galerkin).  For a
# 2x2 antisymmetric theta the phase argument is c*(k1*l2 - k2*l1) with
# c = spacing^2 * theta12 / 2, so all phases live in a lookup table indexed
# by the integer s = k1*l2 - k2*l1 in [-2K^2, 2K^2].  Each output entry is
# an independent sum accumulated in ascending (l1, l2) order, which makes
# the result bit-identical whether rows run sequentially or in parallel.

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange

cnp.import_array()


cdef void _row(double complex[:, ::1] out, const double complex[:, ::1] x,
               const double complex[:, ::1] y, const double complex[::1] lut,
               double w, int K, int M, int smax, int a1) noexcept nogil:
    cdef int k1 = a1 - K
    cdef int b1lo = a1 - K if a1 - K > 0 else 0
    cdef int b1hi = a1 + K if a1 + K < M - 1 else M - 1
    cdef int a2, k2, b1, b2, l1, l2, c1, c2, b2lo, b2hi, s
    cdef double complex acc
    for a2 in range(M):
        k2 = a2 - K
        b2lo = a2 - K if a2 - K > 0 else 0
        b2hi = a2 + K if a2 + K < M - 1 else M - 1
        acc = 0
        for b1 in range(b1lo, b1hi + 1):
            l1 = b1 - K
            c1 = a1 - b1 + K
            for b2 in range(b2lo, b2hi + 1):
                l2 = b2 - K
                c2 = a2 - b2 + K
                s = k1 * l2 - k2 * l1
                acc = acc + lut[s + smax] * x[c1, c2] * y[b1, b2]
        out[a1, a2] = w * acc


def twisted_convolve_2d(const double complex[:, ::1] x, const double complex[:, ::1] y,
                        const double complex[::1] lut, double w, int K,
                        bint parallel=False):
    cdef int M = 2 * K + 1
    cdef int smax = 2 * K * K
    out_arr = np.empty((M, M), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef int a1
    if parallel:
        for a1 in prange(M, nogil=True, schedule="static"):
            _row(out, x, y, lut, w, K, M, smax, a1)
    else:
        with nogil:
            for a1 in range(M):
                _row(out, x, y, lut, w, K, M, smax, a1)
    return out_arr
