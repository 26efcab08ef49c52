"""Self-operational 1D layer: a sum of convolutions over element-wise powers.

The layer's kernel applies a learned degree-Q polynomial per tap: block q of
the power stack holds x^q and convolves against the q-th weight slice, so
degree 1 reduces exactly to a plain convolution. Powers are built by repeated
multiplication and cached for the backward pass.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import ConfigurationError
from .nn import _check_conv, _pad, ConvParams, tanh_act, tanh_act_grad


@dataclass
class GenerativeLayer:
    weights: np.ndarray  # [C_out, C_in, K, degree]
    bias: np.ndarray  # [C_out]
    stride: int = 1
    pad_left: int = 0
    pad_right: int = 0
    has_activation: bool = True

    @property
    def out_channels(self):
        return self.weights.shape[0]

    @property
    def in_channels(self):
        return self.weights.shape[1]

    @property
    def kernel_size(self):
        return self.weights.shape[2]

    @property
    def degree(self):
        return self.weights.shape[3]

    def param_count(self):
        return self.weights.size + self.bias.size


def make_layer(in_channels, out_channels, kernel_size, degree, rng, *, stride=1,
               pad_left=0, pad_right=0, has_activation=True, dtype=np.float32):
    """Initialize a layer: weights uniform in +-sqrt(1/(C_in*K*degree)), bias zero."""
    if degree < 1:
        raise ConfigurationError(f"degree must be >= 1, got {degree}")
    if in_channels < 1 or out_channels < 1 or kernel_size < 1:
        raise ConfigurationError(
            f"channels and kernel size must be >= 1, got "
            f"{in_channels}/{out_channels}/{kernel_size}"
        )
    bound = np.sqrt(1.0 / (in_channels * kernel_size * degree))
    w = rng.uniform(-bound, bound, size=(out_channels, in_channels, kernel_size, degree))
    return GenerativeLayer(
        weights=w.astype(dtype),
        bias=np.zeros(out_channels, dtype=dtype),
        stride=stride,
        pad_left=pad_left,
        pad_right=pad_right,
        has_activation=has_activation,
    )


def power_stack(x, degree):
    """Stack [x, x^2, ..., x^degree] along the channel axis."""
    if degree < 1:
        raise ConfigurationError(f"degree must be >= 1, got {degree}")
    if degree == 1:
        return x
    blocks = [x]
    for _ in range(degree - 1):
        blocks.append(blocks[-1] * x)
    return np.concatenate(blocks, axis=0)


def _folded_weights(layer):
    # [C_out, C_in, K, Q] -> [C_out, Q*C_in, K], power-block-major channels
    c_out, c_in, k, q = layer.weights.shape
    return np.ascontiguousarray(
        layer.weights.transpose(0, 3, 1, 2).reshape(c_out, q * c_in, k)
    )


@dataclass
class LayerCache:
    powers: np.ndarray  # power stack of the padded input, [Q*C_in, L_p]
    out: np.ndarray  # layer output (post-activation when present)


def _conv_view(layer):
    # shape-check shim reusing the conv1d validation on the q=1 slice
    return ConvParams(
        weights=layer.weights[:, :, :, 0],
        bias=layer.bias,
        stride=layer.stride,
        pad_left=layer.pad_left,
        pad_right=layer.pad_right,
    )


def selfonn_forward(x, layer, want_cache=False):
    """out = bias + sum_q conv(W_q, x^q), then tanh when has_activation."""
    _check_conv(x, _conv_view(layer))
    xp = _pad(x, layer.pad_left, layer.pad_right)
    powers = power_stack(xp, layer.degree)
    out = backend.conv_fwd(powers, _folded_weights(layer), layer.stride)
    out += layer.bias[:, None]
    if layer.has_activation:
        out = tanh_act(out)
    if want_cache:
        return out, LayerCache(powers=powers, out=out)
    return out


def selfonn_grads(x, layer, dout, cache=None, want_dx=True, want_dw=True):
    """Exact partials (dX, dW, dB); x may be None when a cache is supplied.

    want_dx / want_dw skip the input/weight gradient GEMMs when a caller
    needs only one side (frozen-network passes); skipped slots return None.
    """
    if cache is None:
        _, cache = selfonn_forward(x, layer, want_cache=True)
    c_out, c_in, k, q = layer.weights.shape
    lp = cache.powers.shape[1]
    length = lp - layer.pad_left - layer.pad_right
    if dout.shape != cache.out.shape:
        raise ConfigurationError(
            f"dOut shape {dout.shape} does not match output shape {cache.out.shape}"
        )
    dz = tanh_act_grad(dout, cache.out) if layer.has_activation else dout
    dz = np.ascontiguousarray(dz)
    db = dz.sum(axis=1)
    dw = None
    if want_dw:
        dw_folded = backend.conv_bwd_w(dz, cache.powers, k, layer.stride)
        dw = np.ascontiguousarray(
            dw_folded.reshape(c_out, q, c_in, k).transpose(0, 2, 3, 1)
        )
    dx = None
    if want_dx:
        dpowers = backend.conv_bwd_x(dz, _folded_weights(layer), layer.stride, lp)
        # chain rule through the powers: d(x^q)/dx = q * x^(q-1)
        dxp = dpowers[:c_in].copy()
        for qq in range(2, q + 1):
            block = dpowers[(qq - 1) * c_in : qq * c_in]
            prev_power = cache.powers[(qq - 2) * c_in : (qq - 1) * c_in]
            dxp += qq * block * prev_power
        dx = dxp[:, layer.pad_left : layer.pad_left + length]
    return dx, dw, db
