"""Randomized corruption pipeline: artifact selection, severity weighting,
and rejection sampling of corrupted segments into a target SDR window.

Stage order is fixed: reverberation, then additive mixture, then additive
white noise. Mixture and noise amplitudes are referenced to the clean
segment's RMS so the three severity weights act independently.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import float_to_pcm, pcm_to_float, read_wav, write_wav
from .dsp import convolve_full
from .errors import ConfigurationError, InputError, RetryError
from .metrics import sdr
from .models import SEGMENT_LENGTH

SPLITS = ("train", "val", "test")
CONDITIONS = ("all", "awgn", "mixture", "reverb")
_CONDITION_ALIASES = {"mix": "mixture", "noise": "awgn", "reverberation": "reverb"}
_CONDITION_FLAGS = {
    "all": (True, True, True),
    "reverb": (True, False, False),
    "mixture": (False, True, False),
    "awgn": (False, False, True),
}
SILENCE_PEAK = 1e-6


def _rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


@dataclass
class ArtifactBank:
    """Impulse responses and interfering waveforms, all at one sample rate.

    Entries are (id, samples) pairs; ids end up in manifest records.
    """

    rirs: list
    mixtures: list
    sample_rate: int = 16000


@dataclass
class CorruptionRecipe:
    use_reverb: bool
    use_mixture: bool
    use_awgn: bool
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    rir_id: str = None
    mixture_id: str = None
    mixture_offset: int = None
    achieved_sdr_db: float = 0.0
    seed: int = 0


@dataclass
class DatasetComposition:
    """Record counts per split and condition."""

    counts: dict = field(default_factory=dict)

    def __post_init__(self):
        for split, conds in self.counts.items():
            if split not in SPLITS:
                raise ConfigurationError(f"unknown split {split!r}")
            for cond, n in conds.items():
                if cond not in CONDITIONS:
                    raise ConfigurationError(f"unknown condition {cond!r}")
                if not isinstance(n, int) or n < 0:
                    raise ConfigurationError(f"bad count for {split}:{cond}: {n!r}")

    def total(self):
        return sum(n for conds in self.counts.values() for n in conds.values())

    @classmethod
    def default(cls):
        return cls({
            "train": {"all": 1500, "awgn": 500, "mixture": 500, "reverb": 500},
            "val": {"all": 500, "awgn": 166, "mixture": 166, "reverb": 168},
            "test": {"all": 703, "awgn": 250, "mixture": 250, "reverb": 250},
        })

    @classmethod
    def parse(cls, text):
        """Parse "all:4,awgn:2" or "val:mix:3" items (comma-separated).

        A two-part item counts toward the train split. Later duplicates
        overwrite earlier ones.
        """
        counts = {}
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            parts = item.split(":")
            if len(parts) == 2:
                split, cond, num = "train", parts[0], parts[1]
            elif len(parts) == 3:
                split, cond, num = parts
            else:
                raise ConfigurationError(f"bad composition item {item!r}")
            cond = _CONDITION_ALIASES.get(cond.strip(), cond.strip())
            try:
                n = int(num)
            except ValueError:
                raise ConfigurationError(f"bad count in composition item {item!r}")
            counts.setdefault(split.strip(), {})[cond] = n
        return cls(counts)


def select_artifacts(rng):
    """Draw the three artifact flags, each with probability 1/2, redrawing
    until at least one is on."""
    while True:
        flags = rng.random(3) < 0.5
        if flags.any():
            return bool(flags[0]), bool(flags[1]), bool(flags[2])


def apply_reverb(x, rir, alpha):
    """Wet/dry mix (1-alpha)*x + alpha*wet where wet is the full convolution
    truncated to x's length and RMS-matched to x."""
    x = np.asarray(x, dtype=np.float64).ravel()
    rir = np.asarray(rir, dtype=np.float64).ravel()
    if rir.size == 0 or float(np.max(np.abs(rir))) == 0.0:
        raise InputError("silent impulse response")
    wet = convolve_full(x, rir)[: x.shape[0]]
    wr = _rms(wet)
    if wr > 0.0:
        wet = wet * (_rms(x) / wr)
    return (1.0 - alpha) * x + alpha * wet


def add_mixture(x, mixture, beta, offset, ref_rms=None):
    """x + beta * crop, where crop is mixture[offset : offset+len(x)]
    RMS-matched to ref_rms (default: x's own RMS)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    mixture = np.asarray(mixture, dtype=np.float64).ravel()
    m = x.shape[0]
    offset = int(offset)
    if offset < 0 or offset + m > mixture.shape[0]:
        raise InputError(
            f"crop [{offset}, {offset + m}) out of range for {mixture.shape[0]} samples"
        )
    crop = mixture[offset : offset + m]
    cr = _rms(crop)
    if cr == 0.0:
        raise InputError("silent mixture crop")
    ref = _rms(x) if ref_rms is None else float(ref_rms)
    return x + beta * (ref / cr) * crop


def add_awgn(x, gamma, rng, ref_rms=None, noise=None):
    """x + gamma * n with n standard normal scaled to ref_rms (default: x's
    own RMS). A precomputed noise vector may be supplied."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if noise is None:
        noise = rng.standard_normal(x.shape[0])
    nr = _rms(noise)
    if nr == 0.0:
        raise InputError("silent noise vector")
    ref = _rms(x) if ref_rms is None else float(ref_rms)
    return x + gamma * (ref / nr) * noise


def _draw_identities(bank, flags, rng, m):
    use_reverb, use_mixture, use_awgn = flags
    rir_id = rir = mixture_id = mix = offset = noise = None
    if use_reverb:
        if not bank.rirs:
            raise ConfigurationError("reverb selected but the bank has no impulse responses")
        rir_id, rir = bank.rirs[int(rng.integers(len(bank.rirs)))]
    if use_mixture:
        if not bank.mixtures:
            raise ConfigurationError("mixture selected but the bank has no mixture sources")
        mixture_id, mix = bank.mixtures[int(rng.integers(len(bank.mixtures)))]
        if len(mix) < m:
            raise ConfigurationError(
                f"mixture {mixture_id!r} has {len(mix)} samples, need at least {m}"
            )
        offset = int(rng.integers(len(mix) - m + 1))
    if use_awgn:
        noise = rng.standard_normal(m)
    return rir_id, rir, mixture_id, mix, offset, noise


def corrupt_segment(x, bank, rng, sdr_min=-6.0, sdr_max=6.0, max_retries=100,
                    force_flags=None, quantize_pcm=True, seed=0):
    """Corrupt one segment into the [sdr_min, sdr_max] dB window.

    Artifact identities (which RIR, which mixture crop, the noise vector) are
    drawn once; only the severity weights are redrawn across attempts. With
    quantize_pcm the accepted SDR is measured on the PCM-rounded signal, i.e.
    on exactly the bytes a WAV writer would emit.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != SEGMENT_LENGTH:
        raise InputError(f"expected {SEGMENT_LENGTH} samples, got {x.shape[0]}")
    if float(np.max(np.abs(x))) <= SILENCE_PEAK:
        raise InputError("silent input segment")
    flags = tuple(force_flags) if force_flags is not None else select_artifacts(rng)
    if len(flags) != 3 or not any(flags):
        raise InputError(f"bad artifact flags {flags!r}")
    use_reverb, use_mixture, use_awgn = flags
    rir_id, rir, mixture_id, mix, offset, noise = _draw_identities(
        bank, flags, rng, x.shape[0]
    )
    ref_rms = _rms(x)
    for _ in range(max_retries):
        alpha = beta = gamma = 0.0
        y = x
        if use_reverb:
            alpha = float(rng.random())
            y = apply_reverb(y, rir, alpha)
        if use_mixture:
            beta = float(rng.random())
            y = add_mixture(y, mix, beta, offset, ref_rms=ref_rms)
        if use_awgn:
            gamma = float(rng.random())
            y = add_awgn(y, gamma, rng, ref_rms=ref_rms, noise=noise)
        if quantize_pcm:
            y = pcm_to_float(float_to_pcm(y))
        achieved = sdr(x, y)
        if sdr_min <= achieved <= sdr_max:
            recipe = CorruptionRecipe(
                use_reverb=use_reverb, use_mixture=use_mixture, use_awgn=use_awgn,
                alpha=alpha, beta=beta, gamma=gamma,
                rir_id=rir_id, mixture_id=mixture_id, mixture_offset=offset,
                achieved_sdr_db=achieved, seed=int(seed),
            )
            return y, recipe
    raise RetryError(
        f"no attempt of {max_retries} reached SDR in [{sdr_min}, {sdr_max}] dB",
        flags=flags,
    )


def synth_test_rir(t60_seconds, length, rng, sample_rate=16000):
    """Synthetic impulse response: unit direct path followed by a noise tail
    under an exponential decay reaching -60 dB at t60. Peak is sample 0."""
    if t60_seconds <= 0.0:
        raise InputError(f"t60 must be positive, got {t60_seconds}")
    if length < 1:
        raise InputError(f"length must be >= 1, got {length}")
    t = np.arange(length) / float(sample_rate)
    tail = rng.standard_normal(length) * np.exp(-6.91 * t / t60_seconds)
    tail[0] = 0.0
    peak = float(np.max(np.abs(tail)))
    if peak > 0.9:
        # keep the direct path dominant so sample 0 stays the global peak;
        # never scale up, or the t60->0 limit would stop being an impulse
        tail *= 0.9 / peak
    rir = tail
    rir[0] = 1.0
    return rir


def load_artifact_bank(rir_dir=None, mixture_dir=None, sample_rate=16000):
    """Load WAVs from the two directories (sorted by name; ids are file
    stems). Either directory may be absent, leaving that list empty."""

    def _load(directory):
        if directory is None:
            return []
        directory = Path(directory)
        if not directory.is_dir():
            raise ConfigurationError(f"not a directory: {directory}")
        entries = []
        for path in sorted(directory.glob("*.wav")):
            wav = read_wav(path)
            if wav.sample_rate != sample_rate:
                raise ConfigurationError(
                    f"{path} is {wav.sample_rate} Hz, bank is {sample_rate} Hz"
                )
            entries.append((path.stem, wav.samples))
        return entries

    return ArtifactBank(rirs=_load(rir_dir), mixtures=_load(mixture_dir),
                        sample_rate=sample_rate)


@dataclass
class DatasetBuildResult:
    manifest_path: Path
    records: list
    skipped_files: list


def _load_clean_pool(clean_dir, sample_rate):
    """Cut every readable clean WAV into consecutive non-overlapping
    segments, skipping silent ones. Returns (segments, skipped file names)."""
    clean_dir = Path(clean_dir)
    if not clean_dir.is_dir():
        raise ConfigurationError(f"not a directory: {clean_dir}")
    pool = []
    skipped = []
    for path in sorted(clean_dir.glob("*.wav")):
        try:
            wav = read_wav(path)
        except InputError:
            skipped.append(path.name)
            continue
        if wav.sample_rate != sample_rate:
            raise ConfigurationError(
                f"{path} is {wav.sample_rate} Hz, bank is {sample_rate} Hz"
            )
        for start in range(0, wav.samples.shape[0] - SEGMENT_LENGTH + 1,
                           SEGMENT_LENGTH):
            seg = wav.samples[start : start + SEGMENT_LENGTH]
            if float(np.max(np.abs(seg))) > SILENCE_PEAK:
                pool.append(seg)
    return pool, skipped


def _record_seed(seed, index):
    ss = np.random.SeedSequence((int(seed), int(index)))
    return int(ss.generate_state(1, np.uint64)[0])


def build_dataset(clean_dir, out_dir, bank, comp, seed, sdr_min=-6.0, sdr_max=6.0,
                  reselect_rounds=10):
    """Fill the composition with corrupted segments and write the dataset.

    Layout: <out>/<split>/{clean,corrupted}/<index>.wav plus <out>/manifest.jsonl
    with paths relative to the manifest. Each record gets its own random
    stream derived from (seed, record index), so outputs are byte-determined
    by (corpus, bank, composition, seed) and each record is reproducible from
    its manifest seed alone.
    """
    out_dir = Path(out_dir)
    pool, skipped = _load_clean_pool(clean_dir, bank.sample_rate)
    slots = []
    for split in SPLITS:
        for cond in CONDITIONS:
            slots.extend([(split, cond)] * comp.counts.get(split, {}).get(cond, 0))
    if len(pool) < len(slots):
        raise ConfigurationError(
            f"composition needs {len(slots)} clean segments, found {len(pool)}"
        )
    perm = np.random.default_rng(np.random.SeedSequence((int(seed), 0))).permutation(
        len(pool)
    )
    records = []
    for idx, (split, cond) in enumerate(slots):
        clean = pool[int(perm[idx])]
        rec_seed = _record_seed(seed, idx + 1)
        rng = np.random.default_rng(rec_seed)
        flags = _CONDITION_FLAGS[cond]
        corrupted = recipe = None
        for _ in range(reselect_rounds):
            try:
                corrupted, recipe = corrupt_segment(
                    clean, bank, rng, sdr_min=sdr_min, sdr_max=sdr_max,
                    force_flags=flags, seed=rec_seed,
                )
                break
            except RetryError:
                continue
        if recipe is None:
            raise RetryError(
                f"record {idx} ({split}/{cond}) never reached the SDR window",
                flags=flags,
            )
        clean_rel = Path(split) / "clean" / f"{idx:05d}.wav"
        corr_rel = Path(split) / "corrupted" / f"{idx:05d}.wav"
        write_wav(out_dir / clean_rel, clean, bank.sample_rate)
        write_wav(out_dir / corr_rel, corrupted, bank.sample_rate)
        records.append({
            "clean_path": clean_rel.as_posix(),
            "corrupted_path": corr_rel.as_posix(),
            "split": split,
            "condition": cond,
            **asdict(recipe),
        })
    manifest_path = out_dir / "manifest.jsonl"
    with open(manifest_path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")
    return DatasetBuildResult(manifest_path=manifest_path, records=records,
                              skipped_files=skipped)
