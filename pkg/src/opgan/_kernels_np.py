"""Pure-numpy conv kernels: per-tap GEMMs on strided views.

Strategy: a length-K kernel at stride s is K rank-1-in-tap GEMMs
out += W[:, :, r] @ x[:, r::s][:, :L_out]. For stride 1 the tap segments are
views (BLAS consumes them directly); for stride > 1 the input is split once
into its s sample phases so every tap segment is again a unit-stride view.
All functions are dtype-generic; the float64 path is what the finite
difference gradient checks run against.
"""

import numpy as np


def _out_len(lp, k, stride):
    return (lp - k) // stride + 1


def _phases(xp, stride):
    # phase p holds samples p, p+s, p+2s, ... as a contiguous block
    return [np.ascontiguousarray(xp[:, p::stride]) for p in range(stride)]


def conv_fwd(xp, w, stride):
    """xp: padded input [C_in, L_p]; w: [C_out, C_in, K] -> [C_out, L_out]."""
    c_out, c_in, k = w.shape
    lout = _out_len(xp.shape[1], k, stride)
    taps = [np.ascontiguousarray(w[:, :, r]) for r in range(k)]
    if stride == 1:
        out = taps[0] @ xp[:, :lout]
        for r in range(1, k):
            out += taps[r] @ xp[:, r : r + lout]
        return out
    ph = _phases(xp, stride)
    out = None
    for r in range(k):
        seg = ph[r % stride][:, r // stride : r // stride + lout]
        t = taps[r] @ seg
        out = t if out is None else out + t
    return out


def conv_bwd_x(dout, w, stride, lp):
    """Adjoint of conv_fwd w.r.t. the padded input; returns [C_in, L_p]."""
    c_out, c_in, k = w.shape
    lout = dout.shape[1]
    taps = [np.ascontiguousarray(w[:, :, r]) for r in range(k)]
    if stride == 1:
        dxp = np.zeros((c_in, lp), dtype=dout.dtype)
        for r in range(k):
            dxp[:, r : r + lout] += taps[r].T @ dout
        return dxp
    widths = [(lp - p + stride - 1) // stride for p in range(stride)]
    dph = [np.zeros((c_in, wd), dtype=dout.dtype) for wd in widths]
    for r in range(k):
        o = r // stride
        dph[r % stride][:, o : o + lout] += taps[r].T @ dout
    dxp = np.empty((c_in, lp), dtype=dout.dtype)
    for p in range(stride):
        dxp[:, p::stride] = dph[p]
    return dxp


def conv_bwd_w(dout, xp, k, stride):
    """Weight gradient; dout: [C_out, L_out], xp: [C_in, L_p] -> [C_out, C_in, K]."""
    c_out, lout = dout.shape
    c_in = xp.shape[0]
    dw = np.empty((c_out, c_in, k), dtype=dout.dtype)
    if stride == 1:
        for r in range(k):
            dw[:, :, r] = dout @ xp[:, r : r + lout].T
        return dw
    ph = _phases(xp, stride)
    for r in range(k):
        seg = ph[r % stride][:, r // stride : r // stride + lout]
        dw[:, :, r] = dout @ seg.T
    return dw
