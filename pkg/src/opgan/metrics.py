"""Objective restoration metrics and dataset-level evaluation.

sdr here is also the single definition used by the corruption pipeline's
accept/reject gate, so generation and evaluation can never disagree.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.signal

from .audio_io import read_wav
from .dsp import stft
from .errors import InputError

SDR_CAP_DB = 100.0
SNR_FLOOR_DB = -10.0
SNR_CEIL_DB = 35.0

# frequency-weighted segmental SNR conventions
FWSSNR_BANDS = 25
FWSSNR_WEIGHT_EXP = 0.2
FWSSNR_FRAME = 512
FWSSNR_HOP = 256

# short-time intelligibility conventions (all at the 10 kHz working rate)
STOI_FS = 10000
STOI_FRAME = 256
STOI_HOP = 128
STOI_BANDS = 15
STOI_MIN_CENTER_HZ = 150.0
STOI_SEGMENT_FRAMES = 30
STOI_DYN_RANGE_DB = 40.0
STOI_CLIP_DB = -15.0
_EPS = 1e-15


def _pair(ref, est):
    ref = np.asarray(ref, dtype=np.float64).ravel()
    est = np.asarray(est, dtype=np.float64).ravel()
    if ref.shape != est.shape:
        raise InputError(f"length mismatch: ref {ref.shape[0]}, est {est.shape[0]}")
    return ref, est


def sdr(ref, est):
    """10*log10(reference energy / residual energy), capped at +100 dB."""
    ref, est = _pair(ref, est)
    ref_e = float(np.sum(ref * ref))
    if ref_e <= 0.0:
        raise InputError("silent reference signal")
    err_e = float(np.sum((ref - est) ** 2))
    if err_e <= 1e-12 * ref_e:
        return SDR_CAP_DB
    return 10.0 * math.log10(ref_e / err_e)


def segsnr(ref, est, frame=512, hop=256, floor=SNR_FLOOR_DB, ceil=SNR_CEIL_DB):
    """Mean of per-frame SNRs clamped to [floor, ceil]; near-silent reference
    frames (energy <= 1e-10) are excluded."""
    ref, est = _pair(ref, est)
    if ref.shape[0] < frame:
        raise InputError(f"signal length {ref.shape[0]} < frame {frame}")
    vals = []
    for o in range(0, ref.shape[0] - frame + 1, hop):
        rf = ref[o : o + frame]
        re = float(np.sum(rf * rf))
        if re <= 1e-10:
            continue
        ee = float(np.sum((rf - est[o : o + frame]) ** 2))
        if ee == 0.0:
            vals.append(ceil)
        else:
            vals.append(min(max(10.0 * math.log10(re / ee), floor), ceil))
    if not vals:
        raise InputError("no frames with reference energy above the silence cutoff")
    return float(np.mean(vals))


def _mel(f):
    return 2595.0 * np.log10(1.0 + f / 700.0)


def _mel_inv(m):
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def mel_band_matrix(num_bands=FWSSNR_BANDS, nfft=FWSSNR_FRAME, fs=16000):
    """Unit-height triangular bands, mel-spaced over [0, fs/2]; [bands, bins]."""
    edges = _mel_inv(np.linspace(0.0, _mel(fs / 2.0), num_bands + 2))
    freqs = np.arange(nfft // 2 + 1) * (fs / nfft)
    tri = np.zeros((num_bands, freqs.shape[0]))
    for b in range(num_bands):
        lo, mid, hi = edges[b], edges[b + 1], edges[b + 2]
        rising = (freqs >= lo) & (freqs < mid)
        falling = (freqs >= mid) & (freqs < hi)
        if mid > lo:
            tri[b, rising] = (freqs[rising] - lo) / (mid - lo)
        if hi > mid:
            tri[b, falling] = (hi - freqs[falling]) / (hi - mid)
    return tri


def _band_magnitudes(x, fs):
    spec = stft(x, frame_size=FWSSNR_FRAME, hop=FWSSNR_HOP)
    power = np.abs(spec.frames) ** 2
    return np.sqrt(power @ mel_band_matrix(fs=fs).T)  # [frames, bands]


def fwssnr_from_bands(bands_ref, bands_est, floor=SNR_FLOOR_DB, ceil=SNR_CEIL_DB,
                      weight_exp=FWSSNR_WEIGHT_EXP):
    """Weighted band-SNR mean over frames, from [frames, bands] magnitudes."""
    bands_ref = np.atleast_2d(np.asarray(bands_ref, dtype=np.float64))
    bands_est = np.atleast_2d(np.asarray(bands_est, dtype=np.float64))
    if bands_ref.shape != bands_est.shape:
        raise InputError("band magnitude shapes differ")
    num = bands_ref ** 2
    den = (bands_ref - bands_est) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0.0, num / den, np.inf)
        snr = np.clip(10.0 * np.log10(ratio), floor, ceil)
    weights = bands_ref ** weight_exp
    wsum = weights.sum(axis=1)
    keep = wsum > 0.0
    if not np.any(keep):
        raise InputError("all frames silent in the reference")
    scores = (weights * snr).sum(axis=1)[keep] / wsum[keep]
    return float(np.mean(scores))


def fwssnr(ref, est, fs=16000):
    """Frequency-weighted segmental SNR over mel triangular bands."""
    ref, est = _pair(ref, est)
    if ref.shape[0] < FWSSNR_FRAME:
        raise InputError(f"signal length {ref.shape[0]} < frame {FWSSNR_FRAME}")
    return fwssnr_from_bands(_band_magnitudes(ref, fs), _band_magnitudes(est, fs))


def _remove_silent_frames(ref, est, framelen, hop, dyn_range):
    # mask from the reference; both signals rebuilt by overlap-add of the
    # retained windowed frames
    w = np.hanning(framelen + 2)[1:-1]
    offsets = np.arange(0, ref.shape[0] - framelen + 1, hop)
    if offsets.size == 0:
        raise InputError("signal shorter than one frame")
    rf = ref[offsets[:, None] + np.arange(framelen)[None, :]] * w
    ef = est[offsets[:, None] + np.arange(framelen)[None, :]] * w
    energies = 20.0 * np.log10(np.linalg.norm(rf, axis=1) + _EPS)
    mask = energies > np.max(energies) - dyn_range
    rf, ef = rf[mask], ef[mask]
    out_len = (rf.shape[0] - 1) * hop + framelen
    out_ref = np.zeros(out_len)
    out_est = np.zeros(out_len)
    for i in range(rf.shape[0]):
        out_ref[i * hop : i * hop + framelen] += rf[i]
        out_est[i * hop : i * hop + framelen] += ef[i]
    return out_ref, out_est


def _third_octave_matrix():
    freqs = np.arange(STOI_FRAME // 2 + 1) * (STOI_FS / STOI_FRAME)
    cf = STOI_MIN_CENTER_HZ * 2.0 ** (np.arange(STOI_BANDS) / 3.0)
    lo = cf / 2.0 ** (1.0 / 6.0)
    hi = cf * 2.0 ** (1.0 / 6.0)
    obm = np.zeros((STOI_BANDS, freqs.shape[0]))
    for b in range(STOI_BANDS):
        lo_id = int(np.argmin((freqs - lo[b]) ** 2))
        hi_id = int(np.argmin((freqs - hi[b]) ** 2))
        obm[b, lo_id:hi_id] = 1.0
    return obm


def stoi(ref, est, fs):
    """Short-time intelligibility in [-1, 1]: mean correlation of one-third
    octave band envelopes over 30-frame segments at a 10 kHz working rate."""
    ref, est = _pair(ref, est)
    if fs < STOI_FS:
        raise InputError(f"sample rate {fs} below the 10 kHz working rate")
    if fs != STOI_FS:
        g = math.gcd(STOI_FS, int(fs))
        ref = scipy.signal.resample_poly(ref, STOI_FS // g, int(fs) // g)
        est = scipy.signal.resample_poly(est, STOI_FS // g, int(fs) // g)
    if ref.shape[0] < STOI_FRAME:
        raise InputError("signal too short for one analysis frame")
    ref, est = _remove_silent_frames(ref, est, STOI_FRAME, STOI_HOP, STOI_DYN_RANGE_DB)
    if ref.shape[0] < STOI_FRAME:
        raise InputError("too little signal retained after silent-frame removal")
    spec_r = stft(ref, frame_size=STOI_FRAME, hop=STOI_HOP)
    spec_e = stft(est, frame_size=STOI_FRAME, hop=STOI_HOP)
    obm = _third_octave_matrix()
    bx = np.sqrt(obm @ (np.abs(spec_r.frames) ** 2).T)  # [bands, frames]
    by = np.sqrt(obm @ (np.abs(spec_e.frames) ** 2).T)
    t = bx.shape[1]
    if t < STOI_SEGMENT_FRAMES:
        raise InputError(
            f"only {t} frames retained; need {STOI_SEGMENT_FRAMES} for one segment"
        )
    clip = 1.0 + 10.0 ** (-STOI_CLIP_DB / 20.0)
    total = 0.0
    count = 0
    for m in range(STOI_SEGMENT_FRAMES, t + 1):
        xs = bx[:, m - STOI_SEGMENT_FRAMES : m]
        ys = by[:, m - STOI_SEGMENT_FRAMES : m]
        alpha = np.sqrt(np.sum(xs ** 2, axis=1) / (np.sum(ys ** 2, axis=1) + _EPS))
        yp = np.minimum(ys * alpha[:, None], xs * clip)
        xn = xs - xs.mean(axis=1, keepdims=True)
        yn = yp - yp.mean(axis=1, keepdims=True)
        denom = np.linalg.norm(xn, axis=1) * np.linalg.norm(yn, axis=1)
        valid = denom > 0.0
        total += float(np.sum(np.sum(xn * yn, axis=1)[valid] / denom[valid]))
        count += int(np.sum(valid))
    if count == 0:
        raise InputError("no band segments with nonzero variance")
    return total / count


METRIC_NAMES = ("sdr", "segsnr", "fwssnr", "stoi")


def _metric_value(name, clean, other, fs):
    if name == "sdr":
        return sdr(clean, other)
    if name == "segsnr":
        return segsnr(clean, other)
    if name == "fwssnr":
        return fwssnr(clean, other, fs)
    if name == "stoi":
        return stoi(clean, other, fs)
    raise InputError(f"unknown metric {name!r}")


@dataclass
class MetricReport:
    items: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    def to_json_dict(self):
        return {"items": self.items, "summary": self.summary, "errors": self.errors}


def evaluate_set(manifest_path, restored_dir, metric_names=METRIC_NAMES):
    """Per-item metrics of corrupted and restored audio against the clean
    reference, plus per-split means. Items with missing or failing files are
    recorded under errors and excluded from the means."""
    manifest_path = Path(manifest_path)
    restored_dir = Path(restored_dir)
    base = manifest_path.parent
    for name in metric_names:
        if name not in METRIC_NAMES:
            raise InputError(f"unknown metric {name!r}")
    report = MetricReport()
    with open(manifest_path) as f:
        records = [json.loads(line) for line in f if line.strip()]
    for rec in records:
        restored_path = restored_dir / Path(rec["corrupted_path"]).name
        item = {
            "split": rec["split"],
            "condition": rec.get("condition"),
            "clean_path": rec["clean_path"],
            "corrupted_path": rec["corrupted_path"],
            "restored_path": str(restored_path),
        }
        try:
            if not restored_path.exists():
                raise InputError(f"missing restored file {restored_path}")
            clean = read_wav(base / rec["clean_path"])
            corrupted = read_wav(base / rec["corrupted_path"])
            restored = read_wav(restored_path)
            fs = clean.sample_rate
            for name in metric_names:
                item[f"corrupted_{name}"] = _metric_value(
                    name, clean.samples, corrupted.samples, fs
                )
                item[f"restored_{name}"] = _metric_value(
                    name, clean.samples, restored.samples, fs
                )
        except InputError as exc:
            report.errors.append({**item, "error": str(exc)})
            continue
        report.items.append(item)
    splits = sorted({item["split"] for item in report.items})
    for split in splits:
        rows = [item for item in report.items if item["split"] == split]
        entry = {"count": len(rows)}
        for name in metric_names:
            entry[name] = {
                "corrupted_mean": float(np.mean([r[f"corrupted_{name}"] for r in rows])),
                "restored_mean": float(np.mean([r[f"restored_{name}"] for r in rows])),
            }
        report.summary[split] = entry
    return report


def write_report(report, base_path):
    """Write <base>.json and <base>.csv; returns the two paths."""
    base_path = Path(base_path)
    base_path.parent.mkdir(parents=True, exist_ok=True)
    json_path = base_path.with_suffix(".json")
    csv_path = base_path.with_suffix(".csv")
    with open(json_path, "w") as f:
        json.dump(report.to_json_dict(), f, indent=2)
        f.write("\n")
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["split", "metric", "corrupted_mean", "restored_mean", "count"])
        for split, entry in report.summary.items():
            for name, vals in entry.items():
                if name == "count":
                    continue
                writer.writerow([
                    split, name,
                    repr(vals["corrupted_mean"]), repr(vals["restored_mean"]),
                    entry["count"],
                ])
    return json_path, csv_path
