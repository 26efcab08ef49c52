"""Mono 16-bit PCM WAV I/O on the stdlib wave module.

Float <-> PCM mapping is pinned so golden-file tests stay byte-exact:
  pcm = clamp(round(x * 32768), -32768, 32767)
  float = pcm / 32768.0
"""

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError

PCM_SCALE = 32768.0


@dataclass
class WavFile:
    sample_rate: int
    samples: np.ndarray  # float64 in [-1, 1)
    channels: int = 1
    bit_depth: int = 16


def float_to_pcm(x):
    return np.clip(np.rint(np.asarray(x) * PCM_SCALE), -32768, 32767).astype("<i2")


def pcm_to_float(pcm):
    return pcm.astype(np.float64) / PCM_SCALE


def read_wav(path):
    try:
        with wave.open(str(path), "rb") as f:
            channels = f.getnchannels()
            width = f.getsampwidth()
            rate = f.getframerate()
            n = f.getnframes()
            payload = f.readframes(n)
    except (wave.Error, EOFError) as exc:
        raise InputError(f"{path}: not a readable WAV file ({exc})") from exc
    if channels != 1:
        raise InputError(f"{path}: expected mono, got {channels} channels")
    if width != 2:
        raise InputError(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
    pcm = np.frombuffer(payload, dtype="<i2")
    return WavFile(sample_rate=rate, samples=pcm_to_float(pcm))


def write_wav(path, samples, sample_rate):
    pcm = float_to_pcm(samples)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(sample_rate)
        f.writeframes(pcm.tobytes())
