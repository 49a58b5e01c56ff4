# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""3x3 same-padding convolution, channel-last layout.

Patches are gathered into a column buffer in C and contracted with a single
BLAS gemm call; the backward pass scatters column gradients back in C.
"""
import numpy as np
from scipy.linalg.cython_blas cimport sgemm, dgemm

ctypedef fused real:
    float
    double


cdef void _gemm(char* ta, char* tb, int m, int n, int k, real alpha, real* a, int lda,
                real* b, int ldb, real beta, real* c, int ldc) noexcept nogil:
    # column-major BLAS; callers pass row-major operands swapped
    if real is float:
        sgemm(ta, tb, &m, &n, &k, &alpha, a, &lda, b, &ldb, &beta, c, &ldc)
    else:
        dgemm(ta, tb, &m, &n, &k, &alpha, a, &lda, b, &ldb, &beta, c, &ldc)


cdef void _im2col(const real* x, real* cols, Py_ssize_t H, Py_ssize_t W, Py_ssize_t ci) noexcept nogil:
    cdef Py_ssize_t h, v, i, j, c, hh, vv, k = 9 * ci
    cdef real* row
    cdef const real* src
    for h in range(H):
        for v in range(W):
            row = cols + (h * W + v) * k
            for i in range(3):
                hh = h + i - 1
                for j in range(3):
                    vv = v + j - 1
                    if hh < 0 or hh >= H or vv < 0 or vv >= W:
                        for c in range(ci):
                            row[c] = 0
                    else:
                        src = x + (hh * W + vv) * ci
                        for c in range(ci):
                            row[c] = src[c]
                    row += ci


cdef void _col2im(const real* cols, real* gx, Py_ssize_t H, Py_ssize_t W, Py_ssize_t ci) noexcept nogil:
    cdef Py_ssize_t h, v, i, j, c, hh, vv, k = 9 * ci
    cdef const real* row
    cdef real* dst
    for h in range(H):
        for v in range(W):
            row = cols + (h * W + v) * k
            for i in range(3):
                hh = h + i - 1
                for j in range(3):
                    vv = v + j - 1
                    if not (hh < 0 or hh >= H or vv < 0 or vv >= W):
                        dst = gx + (hh * W + vv) * ci
                        for c in range(ci):
                            dst[c] += row[c]
                    row += ci


def conv3x3_forward(real[:, :, ::1] x, real[:, :, :, ::1] w, real[::1] b):
    cdef Py_ssize_t H = x.shape[0], W = x.shape[1], ci = x.shape[2]
    cdef Py_ssize_t co = w.shape[3], P = H * W, k = 9 * ci, p, o
    dtype = np.float32 if real is float else np.float64
    cols_arr = np.empty((P, k), dtype=dtype)
    out_arr = np.empty((H, W, co), dtype=dtype)
    cdef real[:, ::1] cols = cols_arr
    cdef real[:, :, ::1] out = out_arr
    cdef real* op = &out[0, 0, 0]
    with nogil:
        _im2col(&x[0, 0, 0], &cols[0, 0], H, W, ci)
        for p in range(P):
            for o in range(co):
                op[p * co + o] = b[o]
        # out(P, co) += cols(P, k) @ w(k, co)
        _gemm(b"N", b"N", <int>co, <int>P, <int>k, 1, &w[0, 0, 0, 0], <int>co,
              &cols[0, 0], <int>k, 1, op, <int>co)
    return out_arr


def conv3x3_backward(real[:, :, ::1] x, real[:, :, :, ::1] w, real[:, :, ::1] gout):
    """Return (grad_x, grad_w, grad_b) for ``conv3x3_forward``."""
    cdef Py_ssize_t H = x.shape[0], W = x.shape[1], ci = x.shape[2]
    cdef Py_ssize_t co = w.shape[3], P = H * W, k = 9 * ci, p, o
    dtype = np.float32 if real is float else np.float64
    cols_arr = np.empty((P, k), dtype=dtype)
    gcols_arr = np.empty((P, k), dtype=dtype)
    gx_arr = np.zeros((H, W, ci), dtype=dtype)
    gw_arr = np.empty((3, 3, ci, co), dtype=dtype)
    gb_arr = np.zeros(co, dtype=dtype)
    cdef real[:, ::1] cols = cols_arr
    cdef real[:, ::1] gcols = gcols_arr
    cdef real[:, :, ::1] gx = gx_arr
    cdef real[:, :, :, ::1] gw = gw_arr
    cdef real[::1] gb = gb_arr
    cdef real* gp = &gout[0, 0, 0]
    with nogil:
        _im2col(&x[0, 0, 0], &cols[0, 0], H, W, ci)
        for p in range(P):
            for o in range(co):
                gb[o] += gp[p * co + o]
        # gw(k, co) = cols(P, k)^T @ gout(P, co)
        _gemm(b"N", b"T", <int>co, <int>k, <int>P, 1, gp, <int>co,
              &cols[0, 0], <int>k, 0, &gw[0, 0, 0, 0], <int>co)
        # gcols(P, k) = gout(P, co) @ w(k, co)^T
        _gemm(b"T", b"N", <int>k, <int>P, <int>co, 1, &w[0, 0, 0, 0], <int>co,
              gp, <int>co, 0, &gcols[0, 0], <int>k)
        _col2im(&gcols[0, 0], &gx[0, 0, 0], H, W, ci)
    return gx_arr, gw_arr, gb_arr
