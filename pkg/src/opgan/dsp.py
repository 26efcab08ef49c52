"""Signal primitives: windowed short-time transform, inverse, peak
normalization, and full linear convolution."""

from dataclasses import dataclass

import numpy as np
import scipy.signal

from .errors import ConfigurationError, InputError

WINDOW_HANN = "hann"
WINDOW_RECT = "rect"


def hann_window(n):
    """Periodic raised cosine: overlapped sum at 50% hop is exactly 1."""
    if n < 2 or n % 2 != 0:
        raise ConfigurationError(f"window length must be even and >= 2, got {n}")
    # periodic form, not the symmetric one: w[k] = 0.5*(1 - cos(2*pi*k/n))
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n))


def _window(name, n):
    if name == WINDOW_HANN:
        return hann_window(n)
    if name == WINDOW_RECT:
        return np.ones(n)
    raise ConfigurationError(f"unknown window {name!r}")


@dataclass
class Spectrogram:
    frames: np.ndarray  # complex [T, frame_size // 2 + 1]
    frame_size: int
    hop: int
    window: str = WINDOW_HANN


def frame_count(length, frame_size, hop):
    """Frames fully inside the signal, no boundary padding."""
    return 1 + (length - frame_size) // hop


def stft(x, frame_size=256, hop=128, window=WINDOW_HANN):
    x = np.asarray(x)
    if x.ndim != 1:
        raise InputError(f"expected a 1-D signal, got shape {x.shape}")
    if x.shape[0] < frame_size:
        raise InputError(f"signal length {x.shape[0]} < frame size {frame_size}")
    if hop < 1:
        raise ConfigurationError(f"hop must be >= 1, got {hop}")
    w = _window(window, frame_size)
    t = frame_count(x.shape[0], frame_size, hop)
    offsets = np.arange(t) * hop
    frames = x[offsets[:, None] + np.arange(frame_size)[None, :]] * w
    return Spectrogram(
        frames=np.fft.rfft(frames, axis=1),
        frame_size=frame_size,
        hop=hop,
        window=window,
    )


def istft(s):
    """Weighted overlap-add inverse; exact on samples covered by any frame."""
    if not isinstance(s, Spectrogram):
        raise InputError(f"expected a Spectrogram, got {type(s).__name__}")
    if s.frames.ndim != 2 or s.frames.shape[1] != s.frame_size // 2 + 1:
        raise InputError(
            f"frames shape {s.frames.shape} inconsistent with frame size {s.frame_size}"
        )
    if s.hop < 1:
        raise InputError(f"hop must be >= 1, got {s.hop}")
    w = _window(s.window, s.frame_size)
    t = s.frames.shape[0]
    length = (t - 1) * s.hop + s.frame_size
    num = np.zeros(length)
    den = np.zeros(length)
    time_frames = np.fft.irfft(s.frames, n=s.frame_size, axis=1)
    for i in range(t):
        o = i * s.hop
        num[o : o + s.frame_size] += w * time_frames[i]
        den[o : o + s.frame_size] += w * w
    covered = den > 1e-12
    out = np.zeros(length)
    out[covered] = num[covered] / den[covered]
    return out


@dataclass
class NormalizedSegment:
    samples: np.ndarray
    scale: float
    silent: bool = False


def normalize(x):
    """Divide by the max absolute sample. All-zero input passes through
    unchanged with scale 1 and the silent flag set."""
    x = np.asarray(x)
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    if peak == 0.0:
        return NormalizedSegment(samples=x.copy(), scale=1.0, silent=True)
    return NormalizedSegment(samples=x / peak, scale=peak, silent=False)


def denormalize(seg):
    return seg.samples * seg.scale


def convolve_full(x, h):
    """Full linear convolution, output length n + k - 1."""
    x = np.asarray(x)
    h = np.asarray(h)
    if x.size == 0 or h.size == 0:
        raise InputError("convolve_full requires nonempty inputs")
    return scipy.signal.fftconvolve(x, h, mode="full")
