"""Least-squares adversarial losses plus time and log-spectral reconstruction
terms, with analytic gradients for the generated waveform."""

from dataclasses import dataclass

import numpy as np

from .dsp import hann_window, stft
from .errors import InputError

MAGNITUDE_FLOOR = 1e-8  # log of a silent bin is undefined; clamp here
_LN10 = np.log(10.0)


@dataclass
class LossWeights:
    lambda_td: float = 10.0
    lambda_fd: float = 5.0


@dataclass
class LossReport:
    d_loss: float
    g_adv: float
    loss_td: float
    loss_fd: float
    total: float

    def is_finite(self):
        return all(
            np.isfinite(v)
            for v in (self.d_loss, self.g_adv, self.loss_td, self.loss_fd, self.total)
        )


def _flat(x, name):
    x = np.asarray(x)
    if x.ndim == 2 and x.shape[0] == 1:
        return x[0]
    if x.ndim == 1:
        return x
    raise InputError(f"{name} must be a 1xN tensor or 1-D array, got shape {x.shape}")


def _flat_pair(a, b, name_a, name_b):
    fa, fb = _flat(a, name_a), _flat(b, name_b)
    if fa.shape != fb.shape:
        raise InputError(f"{name_a} length {fa.shape[0]} != {name_b} length {fb.shape[0]}")
    return fa, fb


def d_loss(scores_real, scores_fake):
    sr, sf = _flat_pair(scores_real, scores_fake, "scores_real", "scores_fake")
    return float(0.5 * np.mean((sr - 1.0) ** 2) + 0.5 * np.mean(sf ** 2))


def d_loss_grads(scores_real, scores_fake):
    """(dReal, dFake) for d_loss; shapes follow the inputs."""
    sr, sf = _flat_pair(scores_real, scores_fake, "scores_real", "scores_fake")
    p = sr.shape[0]
    dsr = ((sr - 1.0) / p).reshape(np.shape(scores_real))
    dsf = (sf / p).reshape(np.shape(scores_fake))
    return dsr, dsf


def g_adv_loss(scores_fake):
    sf = _flat(scores_fake, "scores_fake")
    return float(0.5 * np.mean((sf - 1.0) ** 2))


def g_adv_loss_grad(scores_fake):
    sf = _flat(scores_fake, "scores_fake")
    return ((sf - 1.0) / sf.shape[0]).reshape(np.shape(scores_fake))


def loss_td(target, generated):
    """Mean squared error over samples."""
    t, g = _flat_pair(target, generated, "target", "generated")
    return float(np.mean((g - t) ** 2))


def loss_td_grad(target, generated):
    """Gradient of loss_td w.r.t. the generated waveform."""
    t, g = _flat_pair(target, generated, "target", "generated")
    return (2.0 * (g - t) / g.shape[0]).reshape(np.shape(generated))


def _floored_magnitudes(x):
    s = stft(x.astype(np.float64))
    return s, np.maximum(np.abs(s.frames), MAGNITUDE_FLOOR)


def loss_fd(target, generated):
    """MSE between log10 spectral magnitudes, averaged over all bins."""
    t, g = _flat_pair(target, generated, "target", "generated")
    _, mt = _floored_magnitudes(t)
    _, mg = _floored_magnitudes(g)
    return float(np.mean((np.log10(mt) - np.log10(mg)) ** 2))


def loss_fd_grad(target, generated):
    """Gradient of loss_fd w.r.t. the generated waveform (adjoint through the
    windowed transform, magnitude, and log)."""
    t, g = _flat_pair(target, generated, "target", "generated")
    s_g, mg = _floored_magnitudes(g)
    _, mt = _floored_magnitudes(t)
    n, hop = s_g.frame_size, s_g.hop
    nbins = s_g.frames.shape[1]
    total_bins = s_g.frames.size
    err = np.log10(mt) - np.log10(mg)
    dmag = np.where(
        np.abs(s_g.frames) > MAGNITUDE_FLOOR,
        -2.0 * err / (total_bins * mg * _LN10),
        0.0,
    )
    # complex bin gradients, then per-frame inverse transform of the
    # one-sided spectrum (bins above Nyquist carry no loss terms)
    cgrad = dmag * s_g.frames / mg
    padded = np.zeros((s_g.frames.shape[0], n), dtype=complex)
    padded[:, :nbins] = cgrad
    dframes = n * np.real(np.fft.ifft(padded, axis=1))
    w = hann_window(n)
    dg = np.zeros_like(g, dtype=np.float64)
    for i in range(s_g.frames.shape[0]):
        o = i * hop
        dg[o : o + n] += w * dframes[i]
    return dg.reshape(np.shape(generated))


def total_g_loss(g_adv, td, fd, weights):
    return float(g_adv + weights.lambda_td * td + weights.lambda_fd * fd)
