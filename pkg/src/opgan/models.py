"""Generator (U-Net of self-operational layers) and patch discriminator.

Fixed to the 32000-sample segment contract: five stride-2 encoder layers take
1x32000 down to 128x1000, five upsample+layer decoder stages mirror back up.
Each decoder stage consumes the channel concatenation of its upsampled input
with the matching encoder output (the last stage concatenates the raw input),
and adds the layer output to the upsampled input where channel counts match.
The discriminator scores a (corrupted, candidate) pair as a 1x1000 patch
vector: linear final layer, tanh elsewhere.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError
from .nn import tanh_act, tanh_act_grad, upsample2, upsample2_grad
from .selfonn import GenerativeLayer, make_layer, selfonn_forward, selfonn_grads

SEGMENT_LENGTH = 32000

ENCODER_WIDTHS = (16, 32, 64, 128, 128)
DECODER_WIDTHS = (128, 64, 32, 16, 1)
ENCODER_LENGTHS = (16000, 8000, 4000, 2000, 1000)
DISC_WIDTHS = (16, 32, 64, 64, 64, 1)
DISC_STRIDES = (2, 2, 2, 2, 1, 2)

# ModelParams: an insertion-ordered name -> array mapping (plain dict).
ModelParams = dict


def count_params(params):
    """Total element count across all arrays of a ModelParams mapping."""
    return sum(int(a.size) for a in params.values())


def _out_len(length, k, stride, pad_left, pad_right):
    return (length + pad_left + pad_right - k) // stride + 1


@dataclass
class GenCache:
    enc_caches: list
    enc_outs: list
    dec_caches: list
    up_channels: list
    residual: list
    y: np.ndarray


class Generator:
    def __init__(self, encoder, decoder):
        self.encoder = encoder
        self.decoder = decoder

    @property
    def degree(self):
        return self.encoder[0].degree

    def named_params(self):
        params = {}
        for i, layer in enumerate(self.encoder, start=1):
            params[f"enc{i}.weight"] = layer.weights
            params[f"enc{i}.bias"] = layer.bias
        for i, layer in enumerate(self.decoder, start=1):
            params[f"dec{i}.weight"] = layer.weights
            params[f"dec{i}.bias"] = layer.bias
        return params

    def forward(self, x, want_cache=False):
        if x.ndim != 2 or x.shape[0] != 1 or x.shape[1] != SEGMENT_LENGTH:
            raise InputError(f"generator expects a 1x{SEGMENT_LENGTH} segment, got {x.shape}")
        h = x
        enc_outs, enc_caches = [], []
        for layer in self.encoder:
            h, c = selfonn_forward(h, layer, want_cache=True)
            enc_outs.append(h)
            enc_caches.append(c)
        skips = [enc_outs[3], enc_outs[2], enc_outs[1], enc_outs[0], x]
        dec_caches, up_channels, residual = [], [], []
        h = enc_outs[4]
        for d, layer in enumerate(self.decoder):
            up = upsample2(h)
            cat = np.concatenate([up, skips[d]], axis=0)
            out, c = selfonn_forward(cat, layer, want_cache=True)
            res = out.shape[0] == up.shape[0]
            if res:
                out = out + up
            dec_caches.append(c)
            up_channels.append(up.shape[0])
            residual.append(res)
            h = out
        y = tanh_act(h)
        if want_cache:
            return y, GenCache(enc_caches, enc_outs, dec_caches, up_channels, residual, y)
        return y

    def backward(self, dy, cache):
        """Parameter gradients for a scalar loss with output gradient dy."""
        grads = {}
        dh = tanh_act_grad(dy, cache.y)
        denc = [None] * 5
        for d in reversed(range(5)):
            layer = self.decoder[d]
            dcat, dw, db = selfonn_grads(None, layer, dh, cache.dec_caches[d])
            grads[f"dec{d + 1}.weight"] = dw
            grads[f"dec{d + 1}.bias"] = db
            upch = cache.up_channels[d]
            dup = dcat[:upch] + dh if cache.residual[d] else dcat[:upch]
            dskip = dcat[upch:]
            if d < 4:
                i = 3 - d
                denc[i] = dskip if denc[i] is None else denc[i] + dskip
            dprev = upsample2_grad(dup)
            if d == 0:
                denc[4] = dprev if denc[4] is None else denc[4] + dprev
            else:
                dh = dprev
        for i in reversed(range(5)):
            dx_i, dw, db = selfonn_grads(
                None, self.encoder[i], denc[i], cache.enc_caches[i], want_dx=(i > 0)
            )
            grads[f"enc{i + 1}.weight"] = dw
            grads[f"enc{i + 1}.bias"] = db
            if i > 0:
                denc[i - 1] = denc[i - 1] + dx_i
        return grads


class Discriminator:
    def __init__(self, layers):
        self.layers = layers

    @property
    def degree(self):
        return self.layers[0].degree

    def named_params(self):
        params = {}
        for i, layer in enumerate(self.layers, start=1):
            params[f"layer{i}.weight"] = layer.weights
            params[f"layer{i}.bias"] = layer.bias
        return params

    def forward(self, pair, want_cache=False):
        if pair.ndim != 2 or pair.shape[0] != 2 or pair.shape[1] != SEGMENT_LENGTH:
            raise InputError(f"discriminator expects a 2x{SEGMENT_LENGTH} pair, got {pair.shape}")
        h = pair
        caches = []
        for layer in self.layers:
            h, c = selfonn_forward(h, layer, want_cache=True)
            caches.append(c)
        if want_cache:
            return h, caches
        return h

    def backward(self, dscores, caches, want_params=True, want_input=False):
        """Returns (grads-or-None, dInput-or-None) for the score gradient dscores."""
        grads = {} if want_params else None
        dh = dscores
        for i in reversed(range(len(self.layers))):
            need_dx = want_input or i > 0
            dx, dw, db = selfonn_grads(
                None, self.layers[i], dh, caches[i],
                want_dx=need_dx, want_dw=want_params,
            )
            if want_params:
                grads[f"layer{i + 1}.weight"] = dw
                grads[f"layer{i + 1}.bias"] = db
            dh = dx
        dinput = dh if want_input else None
        return grads, dinput


def build_generator(degree, rng=None):
    """Initialized generator; asserts the architecture's shape chain."""
    if degree < 1:
        raise ConfigurationError(f"degree must be >= 1, got {degree}")
    rng = rng if rng is not None else np.random.default_rng(0)
    encoder = []
    in_ch = 1
    for width in ENCODER_WIDTHS:
        encoder.append(make_layer(in_ch, width, 5, degree, rng,
                                  stride=2, pad_left=2, pad_right=2))
        in_ch = width
    skips = (ENCODER_WIDTHS[3], ENCODER_WIDTHS[2], ENCODER_WIDTHS[1], ENCODER_WIDTHS[0], 1)
    decoder = []
    prev = ENCODER_WIDTHS[4]
    for d, width in enumerate(DECODER_WIDTHS):
        decoder.append(make_layer(prev + skips[d], width, 5, degree, rng,
                                  stride=1, pad_left=2, pad_right=2,
                                  has_activation=(d < 4)))
        prev = width
    # shape-chain check against the fixed segment contract
    length = SEGMENT_LENGTH
    for layer, want_len, want_ch in zip(encoder, ENCODER_LENGTHS, ENCODER_WIDTHS):
        length = _out_len(length, layer.kernel_size, layer.stride,
                          layer.pad_left, layer.pad_right)
        assert (want_ch, want_len) == (layer.out_channels, length)
    for layer in decoder:
        length = _out_len(2 * length, layer.kernel_size, layer.stride,
                          layer.pad_left, layer.pad_right)
    assert length == SEGMENT_LENGTH and decoder[-1].out_channels == 1
    return Generator(encoder, decoder)


def build_discriminator(degree, rng=None):
    if degree < 1:
        raise ConfigurationError(f"degree must be >= 1, got {degree}")
    rng = rng if rng is not None else np.random.default_rng(0)
    layers = []
    in_ch = 2
    for i, (width, stride) in enumerate(zip(DISC_WIDTHS, DISC_STRIDES)):
        pads = (1, 1) if stride == 2 else (1, 2)
        layers.append(make_layer(in_ch, width, 4, degree, rng,
                                 stride=stride, pad_left=pads[0], pad_right=pads[1],
                                 has_activation=(i < len(DISC_WIDTHS) - 1)))
        in_ch = width
    length = SEGMENT_LENGTH
    for layer in layers:
        length = _out_len(length, layer.kernel_size, layer.stride,
                          layer.pad_left, layer.pad_right)
    assert length == 1000
    return Discriminator(layers)


def generator_forward(x, g):
    return g.forward(x)


def discriminator_forward(x_corrupted, candidate, d):
    if x_corrupted.shape != candidate.shape:
        raise InputError(
            f"pair shapes differ: {x_corrupted.shape} vs {candidate.shape}"
        )
    pair = np.concatenate([x_corrupted, candidate], axis=0)
    return d.forward(pair)
