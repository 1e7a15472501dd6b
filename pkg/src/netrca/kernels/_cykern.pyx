# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the numerical kernels.

Semantics must match ``_pykern`` exactly; keep the two files in sync.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs, sqrt

cnp.import_array()

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 60


def jacobi_eigh(a):
    """Symmetric eigendecomposition by cyclic Jacobi rotations.

    See ``_pykern.jacobi_eigh`` for the contract.
    """
    A_arr = np.array(a, dtype=np.float64, copy=True, order="C")
    cdef Py_ssize_t n = A_arr.shape[0]
    if A_arr.ndim != 2 or A_arr.shape[1] != n:
        raise ValueError("matrix must be square")
    V_arr = np.eye(n)
    if n == 1:
        return np.diagonal(A_arr).copy(), V_arr

    cdef double[:, ::1] A = A_arr
    cdef double[:, ::1] V = V_arr
    cdef double fro = float(np.sqrt(np.sum(A_arr * A_arr)))
    cdef double floor_ = JACOBI_TOL
    if 1e-15 * fro > floor_:
        floor_ = 1e-15 * fro
    cdef double prev_off = INFINITY
    cdef double off, off2, apq, app, aqq, theta, sgn, t, c, s, akp, akq
    cdef Py_ssize_t sweep, p, q, k
    for sweep in range(JACOBI_MAX_SWEEPS):
        off2 = float(np.sum(A_arr * A_arr) - np.sum(np.diagonal(A_arr) ** 2))
        off = sqrt(off2) if off2 > 0.0 else 0.0
        if off < floor_ or off >= prev_off:
            break
        prev_off = off
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                app = A[p, p]
                aqq = A[q, q]
                theta = 0.5 * (aqq - app) / apq
                sgn = 1.0 if theta >= 0.0 else -1.0
                t = sgn / (fabs(theta) + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    if k == p or k == q:
                        continue
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[p, k] = A[k, p]
                    A[k, q] = s * akp + c * akq
                    A[q, k] = A[k, q]
                for k in range(n):
                    akp = V[k, p]
                    akq = V[k, q]
                    V[k, p] = c * akp - s * akq
                    V[k, q] = s * akp + c * akq
    return np.diagonal(A_arr).copy(), V_arr


def best_split(x, order, in_node, grad, hess, double reg_lambda, double min_child_weight):
    """Exact greedy split search over all features of one tree node.

    See ``_pykern.best_split`` for the contract.
    """
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] ordv = np.ascontiguousarray(order, dtype=np.int64)
    cdef cnp.uint8_t[::1] member = np.ascontiguousarray(in_node, dtype=np.uint8)
    cdef double[::1] g = np.ascontiguousarray(grad, dtype=np.float64)
    cdef double[::1] h = np.ascontiguousarray(hess, dtype=np.float64)

    cdef Py_ssize_t n_rows = xv.shape[0]
    cdef Py_ssize_t n_feats = xv.shape[1]
    cdef int best_feat = -1
    cdef double best_thr = 0.0
    cdef double best_gain = 0.0
    cdef double g_total, h_total, gl, hl, gr, hr, gain, v, vnext, thr
    cdef Py_ssize_t j, i, r, prev
    for j in range(n_feats):
        g_total = 0.0
        h_total = 0.0
        for i in range(n_rows):
            r = ordv[i, j]
            if member[r]:
                g_total += g[r]
                h_total += h[r]
        gl = 0.0
        hl = 0.0
        prev = -1
        for i in range(n_rows):
            r = ordv[i, j]
            if not member[r]:
                continue
            if prev >= 0:
                v = xv[prev, j]
                vnext = xv[r, j]
                if vnext > v:
                    gr = g_total - gl
                    hr = h_total - hl
                    if hl >= min_child_weight and hr >= min_child_weight:
                        gain = 0.5 * (
                            gl * gl / (hl + reg_lambda)
                            + gr * gr / (hr + reg_lambda)
                            - g_total * g_total / (h_total + reg_lambda)
                        )
                        if gain > best_gain:
                            thr = 0.5 * (v + vnext)
                            if thr >= vnext:
                                thr = v
                            best_feat = <int> j
                            best_thr = thr
                            best_gain = gain
            gl += g[r]
            hl += h[r]
            prev = r
    return best_feat, best_thr, best_gain
