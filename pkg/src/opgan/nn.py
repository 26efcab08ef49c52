"""Minimal 1D network primitives with exact analytic gradients.

A Tensor is a plain rank-2 numpy array [channels, length], float32 in normal
use. Every op is a pure function; gradients follow the convention
grads(x, params, dOut) -> partials of any scalar loss whose gradient w.r.t.
the op output is dOut.
"""

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import ConfigurationError

# Documentation alias: [channels, length] numpy array.
Tensor = np.ndarray


@dataclass
class ConvParams:
    weights: np.ndarray  # [C_out, C_in, K]
    bias: np.ndarray  # [C_out]
    stride: int = 1
    pad_left: int = 0
    pad_right: int = 0


def _check_conv(x, p):
    if x.ndim != 2:
        raise ConfigurationError(f"expected [channels, length] input, got shape {x.shape}")
    if p.weights.ndim != 3:
        raise ConfigurationError(f"expected [C_out, C_in, K] weights, got shape {p.weights.shape}")
    c_out, c_in, k = p.weights.shape
    if x.shape[0] != c_in:
        raise ConfigurationError(f"input has {x.shape[0]} channels, weights expect {c_in}")
    if p.bias.shape != (c_out,):
        raise ConfigurationError(f"bias shape {p.bias.shape} does not match C_out={c_out}")
    if p.stride < 1 or p.pad_left < 0 or p.pad_right < 0:
        raise ConfigurationError("stride must be >= 1 and padding >= 0")
    lp = x.shape[1] + p.pad_left + p.pad_right
    lout = (lp - k) // p.stride + 1
    if lout < 1:
        raise ConfigurationError(
            f"output length {lout} < 1 for input length {x.shape[1]}, K={k}, "
            f"stride={p.stride}, pads=({p.pad_left},{p.pad_right})"
        )
    return lout


def _pad(x, pad_left, pad_right):
    if pad_left == 0 and pad_right == 0:
        return np.ascontiguousarray(x)
    return np.pad(x, ((0, 0), (pad_left, pad_right)))


def conv1d(x, p):
    """Zero-padded strided cross-correlation plus bias."""
    _check_conv(x, p)
    xp = _pad(x, p.pad_left, p.pad_right)
    out = backend.conv_fwd(xp, p.weights, p.stride)
    out += p.bias[:, None]
    return out


def conv1d_grads(x, p, dout):
    lout = _check_conv(x, p)
    c_out = p.weights.shape[0]
    if dout.shape != (c_out, lout):
        raise ConfigurationError(
            f"dOut shape {dout.shape} does not match output shape {(c_out, lout)}"
        )
    xp = _pad(x, p.pad_left, p.pad_right)
    k = p.weights.shape[2]
    dxp = backend.conv_bwd_x(dout, p.weights, p.stride, xp.shape[1])
    dx = dxp[:, p.pad_left : p.pad_left + x.shape[1]]
    dw = backend.conv_bwd_w(dout, xp, k, p.stride)
    db = dout.sum(axis=1)
    return dx, dw, db


def tanh_act(x):
    return np.tanh(x)


def tanh_act_grad(dout, activated):
    """Gradient through tanh given the activated output."""
    return dout * (1.0 - activated * activated)


def upsample2(x):
    """Nearest-neighbor x2: each sample repeated once."""
    return np.repeat(x, 2, axis=1)


def upsample2_grad(dout):
    """Adjoint of upsample2: each output pair sums back to its source."""
    return dout[:, 0::2] + dout[:, 1::2]


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_param(cls, param):
        return cls(m=np.zeros_like(param), v=np.zeros_like(param))


def adam_step(param, grad, state, lr):
    """Standard Adam update with bias correction; mutates param and state."""
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise ConfigurationError(
            f"shape mismatch: param {param.shape}, grad {grad.shape}, m {state.m.shape}"
        )
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (grad * grad)
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    param -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return param
