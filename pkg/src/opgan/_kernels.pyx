# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled float32 conv kernels.

Same per-tap GEMM strategy as _kernels_np, but each tap accumulates straight
into the output via sgemm's beta=1 path (no temporaries, no add passes) and
the stride phase split runs as a tight C loop. BLAS does the arithmetic in
both backends; this module only removes the glue cost around it.
"""

import numpy as np

cimport numpy as cnp
from scipy.linalg.cython_blas cimport sgemm


cdef void _gemm(char* ta, char* tb, int m, int n, int k,
                float alpha, const float* a, int lda,
                const float* b, int ldb, float beta, float* c, int ldc):
    sgemm(ta, tb, &m, &n, &k, &alpha, <float*> a, &lda,
          <float*> b, &ldb, &beta, c, &ldc)


cdef object _tap_major(w):
    # [C_out, C_in, K] -> contiguous [K, C_out, C_in]
    return np.ascontiguousarray(np.transpose(np.asarray(w), (2, 0, 1)))


cdef object _split_phases(cnp.float32_t[:, ::1] xp, int stride):
    cdef int c_in = xp.shape[0]
    cdef int lp = xp.shape[1]
    cdef int wmax = (lp + stride - 1) // stride
    ph_arr = np.zeros((stride, c_in, wmax), dtype=np.float32)
    cdef cnp.float32_t[:, :, ::1] ph = ph_arr
    cdef int p, i, m, width
    for p in range(stride):
        width = (lp - p + stride - 1) // stride
        for i in range(c_in):
            for m in range(width):
                ph[p, i, m] = xp[i, m * stride + p]
    return ph_arr


def conv_fwd(cnp.float32_t[:, ::1] xp, cnp.float32_t[:, :, ::1] w, int stride):
    cdef int c_out = w.shape[0]
    cdef int c_in = w.shape[1]
    cdef int k = w.shape[2]
    cdef int lp = xp.shape[1]
    cdef int lout = (lp - k) // stride + 1
    out_arr = np.empty((c_out, lout), dtype=np.float32)
    cdef cnp.float32_t[:, ::1] out = out_arr
    wt_arr = _tap_major(w)
    cdef cnp.float32_t[:, :, ::1] wt = wt_arr
    cdef int r, p, o, wmax
    cdef float beta
    cdef cnp.float32_t[:, :, ::1] ph
    if stride == 1:
        for r in range(k):
            beta = 0.0 if r == 0 else 1.0
            _gemm(b"N", b"N", lout, c_out, c_in, 1.0,
                  &xp[0, r], lp, &wt[r, 0, 0], c_in, beta, &out[0, 0], lout)
        return out_arr
    ph_arr = _split_phases(xp, stride)
    ph = ph_arr
    wmax = ph_arr.shape[2]
    for r in range(k):
        p = r % stride
        o = r // stride
        beta = 0.0 if r == 0 else 1.0
        _gemm(b"N", b"N", lout, c_out, c_in, 1.0,
              &ph[p, 0, o], wmax, &wt[r, 0, 0], c_in, beta, &out[0, 0], lout)
    return out_arr


def conv_bwd_x(cnp.float32_t[:, ::1] dout, cnp.float32_t[:, :, ::1] w,
               int stride, int lp):
    cdef int c_out = w.shape[0]
    cdef int c_in = w.shape[1]
    cdef int k = w.shape[2]
    cdef int lout = dout.shape[1]
    dxp_arr = np.zeros((c_in, lp), dtype=np.float32)
    cdef cnp.float32_t[:, ::1] dxp = dxp_arr
    wt_arr = _tap_major(w)
    cdef cnp.float32_t[:, :, ::1] wt = wt_arr
    cdef int r, p, o, i, m, width, wmax
    cdef cnp.float32_t[:, :, ::1] dph
    if stride == 1:
        for r in range(k):
            _gemm(b"N", b"T", lout, c_in, c_out, 1.0,
                  &dout[0, 0], lout, &wt[r, 0, 0], c_in, 1.0, &dxp[0, r], lp)
        return dxp_arr
    wmax = (lp + stride - 1) // stride
    dph_arr = np.zeros((stride, c_in, wmax), dtype=np.float32)
    dph = dph_arr
    for r in range(k):
        p = r % stride
        o = r // stride
        _gemm(b"N", b"T", lout, c_in, c_out, 1.0,
              &dout[0, 0], lout, &wt[r, 0, 0], c_in, 1.0, &dph[p, 0, o], wmax)
    for p in range(stride):
        width = (lp - p + stride - 1) // stride
        for i in range(c_in):
            for m in range(width):
                dxp[i, m * stride + p] = dph[p, i, m]
    return dxp_arr


def conv_bwd_w(cnp.float32_t[:, ::1] dout, cnp.float32_t[:, ::1] xp,
               int k, int stride):
    cdef int c_out = dout.shape[0]
    cdef int lout = dout.shape[1]
    cdef int c_in = xp.shape[0]
    cdef int lp = xp.shape[1]
    dwt_arr = np.empty((k, c_out, c_in), dtype=np.float32)
    cdef cnp.float32_t[:, :, ::1] dwt = dwt_arr
    cdef int r, p, o, wmax
    cdef cnp.float32_t[:, :, ::1] ph
    if stride == 1:
        for r in range(k):
            _gemm(b"T", b"N", c_in, c_out, lout, 1.0,
                  &xp[0, r], lp, &dout[0, 0], lout, 0.0, &dwt[r, 0, 0], c_in)
    else:
        ph_arr = _split_phases(xp, stride)
        ph = ph_arr
        wmax = ph_arr.shape[2]
        for r in range(k):
            p = r % stride
            o = r // stride
            _gemm(b"T", b"N", c_in, c_out, lout, 1.0,
                  &ph[p, 0, o], wmax, &dout[0, 0], lout, 0.0, &dwt[r, 0, 0], c_in)
    return np.ascontiguousarray(np.transpose(dwt_arr, (1, 2, 0)))
