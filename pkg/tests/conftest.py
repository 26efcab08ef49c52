"""Shared fixtures and independent oracles.

The oracles here are deliberately naive (loop-based DFT, quadruple-loop
polynomial convolution, central finite differences) so the fast
implementations are checked against a second, independent route.
"""

import numpy as np
import pytest

from opgan.audio_io import write_wav
from opgan.corruption import ArtifactBank, synth_test_rir


def naive_dft(frame):
    """O(N^2) real-input DFT, first N//2+1 bins."""
    n = frame.shape[0]
    k = np.arange(n // 2 + 1)[:, None]
    t = np.arange(n)[None, :]
    basis = np.exp(-2j * np.pi * k * t / n)
    return basis @ frame.astype(np.float64)


def naive_conv1d(x, w, b, stride=1, pad_left=0, pad_right=0):
    """Triple-loop strided cross-correlation with bias."""
    co, ci, k = w.shape
    xp = np.concatenate(
        [np.zeros((ci, pad_left)), x, np.zeros((ci, pad_right))], axis=1
    )
    lout = (xp.shape[1] - k) // stride + 1
    out = np.zeros((co, lout))
    for o in range(co):
        for j in range(lout):
            acc = 0.0
            for c in range(ci):
                for r in range(k):
                    acc += w[o, c, r] * xp[c, j * stride + r]
            out[o, j] = acc + b[o]
    return out


def naive_selfonn(x, layer):
    """Quadruple-loop oracle: sum over polynomial orders of plain
    convolutions against each order's weight slice, then optional tanh."""
    co, ci, k, degree = layer.weights.shape
    xp = np.concatenate(
        [np.zeros((ci, layer.pad_left)), x, np.zeros((ci, layer.pad_right))],
        axis=1,
    )
    lout = (xp.shape[1] - k) // layer.stride + 1
    out = np.zeros((co, lout))
    for o in range(co):
        for j in range(lout):
            acc = float(layer.bias[o])
            for c in range(ci):
                for r in range(k):
                    v = xp[c, j * layer.stride + r]
                    for q in range(1, degree + 1):
                        acc += layer.weights[o, c, r, q - 1] * v ** q
            out[o, j] = acc
    return np.tanh(out) if layer.has_activation else out


def fd_gradient(f, x, eps=1e-6):
    """Central-difference gradient of scalar f at array x (float64)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + eps
        hi = f(x)
        x[idx] = orig - eps
        lo = f(x)
        x[idx] = orig
        g[idx] = (hi - lo) / (2.0 * eps)
        it.iternext()
    return g


def rel_err(analytic, numeric):
    scale = max(float(np.max(np.abs(numeric))), 1e-8)
    return float(np.max(np.abs(analytic - numeric))) / scale


def layer_to_float64(layer):
    layer.weights = layer.weights.astype(np.float64)
    layer.bias = layer.bias.astype(np.float64)
    return layer


def model_to_float64(model):
    for attr in ("encoder", "decoder", "layers"):
        for layer in getattr(model, attr, []):
            layer_to_float64(layer)
    return model


def clean_tone(index, length=32000, fs=16000):
    """Deterministic synthetic 'clean' audio: a few harmonics with slow
    amplitude modulation plus a quiet noise floor."""
    rng = np.random.default_rng(1000 + index)
    t = np.arange(length) / fs
    f0 = 150.0 + 40.0 * (index % 7)
    x = np.zeros(length)
    for h, a in ((1, 1.0), (2, 0.5), (3, 0.25)):
        phase = rng.uniform(0, 2 * np.pi)
        x += a * np.sin(2 * np.pi * f0 * h * t + phase)
    x *= 0.6 + 0.4 * np.sin(2 * np.pi * (1.0 + 0.5 * (index % 3)) * t)
    x += 0.02 * rng.standard_normal(length)
    return 0.5 * x / np.max(np.abs(x))


def make_clean_dir(path, n_files, segments_per_file=1):
    path.mkdir(parents=True, exist_ok=True)
    idx = 0
    for i in range(n_files):
        parts = [clean_tone(idx + j) for j in range(segments_per_file)]
        idx += segments_per_file
        write_wav(path / f"clean{i:03d}.wav", np.concatenate(parts), 16000)
    return path


def make_bank_dirs(root, n_rirs=3, n_mixtures=3, seed=77):
    rng = np.random.default_rng(seed)
    rir_dir = root / "rirs"
    mix_dir = root / "mixtures"
    rir_dir.mkdir(parents=True, exist_ok=True)
    mix_dir.mkdir(parents=True, exist_ok=True)
    for i in range(n_rirs):
        rir = synth_test_rir(0.15 + 0.1 * i, 3200, rng)
        write_wav(rir_dir / f"rir{i}.wav", 0.5 * rir, 16000)
    for i in range(n_mixtures):
        t = np.arange(48000) / 16000.0
        mix = 0.3 * np.sin(2 * np.pi * (310.0 + 90.0 * i) * t)
        mix += 0.1 * rng.standard_normal(t.shape[0])
        write_wav(mix_dir / f"mix{i}.wav", 0.4 * mix / np.max(np.abs(mix)), 16000)
    return rir_dir, mix_dir


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory):
    """14 clean files x 4 segments = 56 candidate segments."""
    root = tmp_path_factory.mktemp("corpus")
    return make_clean_dir(root / "clean", 14, segments_per_file=4)


@pytest.fixture(scope="session")
def toy_bank_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("bank")
    return make_bank_dirs(root)


@pytest.fixture(scope="session")
def toy_bank(toy_bank_dirs):
    from opgan.corruption import load_artifact_bank

    rir_dir, mix_dir = toy_bank_dirs
    return load_artifact_bank(rir_dir, mix_dir)


@pytest.fixture
def memory_bank():
    """Small in-memory bank for unit tests that do not need files."""
    rng = np.random.default_rng(5)
    rirs = [("r0", synth_test_rir(0.2, 2400, rng))]
    t = np.arange(48000) / 16000.0
    mixtures = [("m0", 0.3 * np.sin(2 * np.pi * 257.0 * t) + 0.05 * rng.standard_normal(48000))]
    return ArtifactBank(rirs=rirs, mixtures=mixtures, sample_rate=16000)


@pytest.fixture
def announce(capsys):
    """Print a line that survives pytest's output capture."""

    def _p(line):
        with capsys.disabled():
            print(line)

    return _p
