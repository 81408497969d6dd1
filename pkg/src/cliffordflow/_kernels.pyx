# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled blade-bilinear kernel.

Every bilinear product in Cl(3,0,1) maps a pair of basis blades to at most one
basis blade, so a product is fully described by a target table and a
coefficient table. The kernel walks only the structurally nonzero entries.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def blade_bilinear(const double[:, :, ::1] a,
                   const double[:, :, ::1] b,
                   const double[:, :, ::1] coef,
                   const cnp.int64_t[:, ::1] target):
    """out[m, c, target[i, j]] += coef[c, i, j] * a[m, c, i] * b[m, c, j]

    ``coef`` has either one channel (shared) or one per channel of ``a``.
    """
    cdef Py_ssize_t n_rows = a.shape[0]
    cdef Py_ssize_t n_chan = a.shape[1]
    cdef Py_ssize_t n_coef = coef.shape[0]
    cdef Py_ssize_t m, c, cc, q, n_terms
    cdef Py_ssize_t i, j

    # compact nonzero term lists per coefficient channel
    cdef cnp.int64_t[:, ::1] ti = np.zeros((n_coef, 256), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] tj = np.zeros((n_coef, 256), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] tt = np.zeros((n_coef, 256), dtype=np.int64)
    cdef double[:, ::1] tw = np.zeros((n_coef, 256), dtype=np.float64)
    cdef cnp.int64_t[::1] nt = np.zeros(n_coef, dtype=np.int64)
    for cc in range(n_coef):
        q = 0
        for i in range(16):
            for j in range(16):
                if coef[cc, i, j] != 0.0:
                    ti[cc, q] = i
                    tj[cc, q] = j
                    tt[cc, q] = target[i, j]
                    tw[cc, q] = coef[cc, i, j]
                    q += 1
        nt[cc] = q

    out = np.zeros((n_rows, n_chan, 16), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef double acc[16]
    cdef const double* pa
    cdef const double* pb
    cdef const cnp.int64_t* pi
    cdef const cnp.int64_t* pj
    cdef const cnp.int64_t* pt
    cdef const double* pw
    cdef int k
    with nogil:
        for m in range(n_rows):
            for c in range(n_chan):
                cc = 0 if n_coef == 1 else c
                n_terms = nt[cc]
                pa = &a[m, c, 0]
                pb = &b[m, c, 0]
                pi = &ti[cc, 0]
                pj = &tj[cc, 0]
                pt = &tt[cc, 0]
                pw = &tw[cc, 0]
                for k in range(16):
                    acc[k] = 0.0
                for q in range(n_terms):
                    acc[pt[q]] += pw[q] * pa[pi[q]] * pb[pj[q]]
                for k in range(16):
                    o[m, c, k] = acc[k]
    return out
