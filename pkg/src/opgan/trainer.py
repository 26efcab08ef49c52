"""Adversarial training loop, validation, checkpointing, and restoration.

Training pairs share one scale: both members are divided by the corrupted
segment's max-abs, so the generator learns relative level correction and
inference can invert the mapping with a single stored scale.
"""

import json
import struct
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import read_wav
from .dsp import NormalizedSegment, denormalize, normalize
from .errors import ConfigurationError, DivergenceError, InputError
from .losses import (
    LossReport,
    LossWeights,
    d_loss,
    d_loss_grads,
    g_adv_loss,
    g_adv_loss_grad,
    loss_fd,
    loss_fd_grad,
    loss_td,
    loss_td_grad,
    total_g_loss,
)
from .metrics import sdr
from .models import SEGMENT_LENGTH, build_discriminator, build_generator
from .nn import AdamState, adam_step

CHECKPOINT_MAGIC = b"OPG1"
CHECKPOINT_VERSION = 1
_META_SAMPLE_RATE = "_meta.sample_rate"


@dataclass
class TrainConfig:
    q_order: int = 3
    batch_size: int = 8
    max_iterations: int = 1000
    lr_g: float = 1e-3
    lr_d: float = 2e-3
    lambda_td: float = 10.0
    lambda_fd: float = 5.0
    seed: int = 0
    validate_every: int = 50
    checkpoint_dir: str = None

    def __post_init__(self):
        if self.q_order < 1:
            raise ConfigurationError(f"q_order must be >= 1, got {self.q_order}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_iterations < 1:
            raise ConfigurationError(
                f"max_iterations must be >= 1, got {self.max_iterations}"
            )
        if self.lr_g <= 0.0 or self.lr_d <= 0.0:
            raise ConfigurationError(
                f"learning rates must be positive, got lr_g={self.lr_g} lr_d={self.lr_d}"
            )
        if self.validate_every < 1:
            raise ConfigurationError(
                f"validate_every must be >= 1, got {self.validate_every}"
            )


@dataclass
class TrainLog:
    iterations: list = field(default_factory=list)
    validations: list = field(default_factory=list)

    def add_iteration(self, iteration, report, seconds):
        if self.iterations and iteration <= self.iterations[-1]["iteration"]:
            raise ConfigurationError("iteration indices must increase")
        self.iterations.append({
            "iteration": iteration,
            "d_loss": report.d_loss,
            "g_adv": report.g_adv,
            "loss_td": report.loss_td,
            "loss_fd": report.loss_fd,
            "total": report.total,
            "seconds": seconds,
        })

    def add_validation(self, iteration, val_sdr_db):
        self.validations.append({"iteration": iteration, "val_sdr_db": val_sdr_db})


def make_opt_states(params):
    return {name: AdamState.for_param(p) for name, p in params.items()}


def _row(x):
    return np.ascontiguousarray(x, dtype=np.float32).reshape(1, -1)


def _check_finite(report):
    if not report.is_finite():
        bad = [
            name
            for name in ("d_loss", "g_adv", "loss_td", "loss_fd", "total")
            if not np.isfinite(getattr(report, name))
        ]
        raise DivergenceError(f"non-finite loss components: {', '.join(bad)}")


def train_step(batch, g, d, g_opt, d_opt, cfg, update_d=True, update_g=True):
    """One discriminator update followed by one generator update on a batch
    of (corrupted, clean) pairs, both already normalized to a shared scale.
    Returns batch-mean loss components; raises on any non-finite loss before
    the corresponding update is applied."""
    if not batch:
        raise ConfigurationError("empty batch")
    b = len(batch)
    weights = LossWeights(lambda_td=cfg.lambda_td, lambda_fd=cfg.lambda_fd)

    d_params = d.named_params()
    d_acc = {name: np.zeros_like(p) for name, p in d_params.items()}
    d_vals = []
    for corrupted, clean in batch:
        x = _row(corrupted)
        y = _row(clean)
        fake = g.forward(x)
        scores_real, caches_real = d.forward(np.concatenate([x, y]), want_cache=True)
        scores_fake, caches_fake = d.forward(np.concatenate([x, fake]), want_cache=True)
        d_vals.append(d_loss(scores_real, scores_fake))
        dsr, dsf = d_loss_grads(scores_real, scores_fake)
        grads_real, _ = d.backward((dsr / b).astype(np.float32), caches_real)
        grads_fake, _ = d.backward((dsf / b).astype(np.float32), caches_fake)
        for name in d_acc:
            d_acc[name] += grads_real[name] + grads_fake[name]
    d_batch = float(np.mean(d_vals))
    if not np.isfinite(d_batch):
        raise DivergenceError("non-finite discriminator loss")
    if update_d:
        for name, p in d_params.items():
            adam_step(p, d_acc[name], d_opt[name], cfg.lr_d)

    g_params = g.named_params()
    g_acc = {name: np.zeros_like(p) for name, p in g_params.items()}
    adv_vals, td_vals, fd_vals = [], [], []
    for corrupted, clean in batch:
        x = _row(corrupted)
        y = _row(clean)
        fake, g_cache = g.forward(x, want_cache=True)
        scores_fake, d_caches = d.forward(np.concatenate([x, fake]), want_cache=True)
        adv_vals.append(g_adv_loss(scores_fake))
        td_vals.append(loss_td(y, fake))
        fd_vals.append(loss_fd(y, fake))
        _, dpair = d.backward(
            g_adv_loss_grad(scores_fake).astype(np.float32), d_caches,
            want_params=False, want_input=True,
        )
        dfake = (
            dpair[1:2]
            + weights.lambda_td * loss_td_grad(y, fake)
            + weights.lambda_fd * loss_fd_grad(y, fake)
        )
        grads = g.backward((dfake / b).astype(np.float32), g_cache)
        for name in g_acc:
            g_acc[name] += grads[name]
    adv = float(np.mean(adv_vals))
    td = float(np.mean(td_vals))
    fd = float(np.mean(fd_vals))
    report = LossReport(
        d_loss=d_batch, g_adv=adv, loss_td=td, loss_fd=fd,
        total=total_g_loss(adv, td, fd, weights),
    )
    _check_finite(report)
    if update_g:
        for name, p in g_params.items():
            adam_step(p, g_acc[name], g_opt[name], cfg.lr_g)
    return report


def restore(x, g):
    """Restore a waveform of any length: process 32000-sample chunks through
    normalize -> generator -> denormalize; the final partial chunk is
    zero-padded and the output cropped back. Silent chunks pass through."""
    x = np.asarray(x, dtype=np.float64).ravel()
    n = x.shape[0]
    out = np.zeros(n)
    for start in range(0, n, SEGMENT_LENGTH):
        chunk = x[start : start + SEGMENT_LENGTH]
        m = chunk.shape[0]
        if m < SEGMENT_LENGTH:
            chunk = np.concatenate([chunk, np.zeros(SEGMENT_LENGTH - m)])
        seg = normalize(chunk)
        if seg.silent:
            out[start : start + m] = chunk[:m]
            continue
        y = g.forward(seg.samples[None, :].astype(np.float32))[0]
        restored = denormalize(
            NormalizedSegment(samples=y.astype(np.float64), scale=seg.scale)
        )
        out[start : start + m] = restored[:m]
    return out


def save_checkpoint(path, g, d, sample_rate=16000):
    """Binary checkpoint: magic, version, generator polynomial degree, then
    named float32 tensors for both models plus a sample-rate entry."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    for prefix, model in (("g.", g), ("d.", d)):
        for name, p in model.named_params().items():
            entries.append((prefix + name, np.asarray(p, dtype=np.float32)))
    entries.append((_META_SAMPLE_RATE, np.array([sample_rate], dtype=np.float32)))
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += struct.pack("<III", CHECKPOINT_VERSION, g.degree, len(entries))
    for name, arr in entries:
        encoded = name.encode("utf-8")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<B", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
        blob += arr.astype("<f4").tobytes(order="C")
    with open(path, "wb") as f:
        f.write(bytes(blob))
    return path


def load_checkpoint(path):
    """Rebuild models from a checkpoint; returns (generator, discriminator,
    sample_rate)."""
    path = Path(path)
    data = path.read_bytes()
    view = memoryview(data)
    if len(data) < 16 or bytes(view[:4]) != CHECKPOINT_MAGIC:
        raise InputError(f"{path} is not a model checkpoint")
    version, degree, count = struct.unpack_from("<III", data, 4)
    if version != CHECKPOINT_VERSION:
        raise InputError(f"unsupported checkpoint version {version}")
    pos = 16
    tensors = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = bytes(view[pos : pos + name_len]).decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<B", data, pos)
            pos += 1
            shape = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            size = int(np.prod(shape, dtype=np.int64)) if rank else 1
            if pos + 4 * size > len(data):
                raise InputError(f"{path}: truncated tensor {name!r}")
            arr = np.frombuffer(view[pos : pos + 4 * size], dtype="<f4")
            pos += 4 * size
            tensors[name] = arr.reshape(shape).copy()
    except struct.error:
        raise InputError(f"{path}: truncated checkpoint")
    sample_rate = 16000
    if _META_SAMPLE_RATE in tensors:
        sample_rate = int(tensors.pop(_META_SAMPLE_RATE)[0])
    g = build_generator(degree)
    d = build_discriminator(degree)
    for prefix, model in (("g.", g), ("d.", d)):
        for name, p in model.named_params().items():
            key = prefix + name
            if key not in tensors:
                raise InputError(f"{path}: missing tensor {key!r}")
            loaded = tensors.pop(key)
            if loaded.shape != p.shape:
                raise InputError(
                    f"{path}: tensor {key!r} has shape {loaded.shape}, expected {p.shape}"
                )
            p[...] = loaded
    if tensors:
        raise InputError(f"{path}: unexpected tensors {sorted(tensors)}")
    return g, d, sample_rate


class _PairCache:
    """LRU of normalized (corrupted, clean) training pairs."""

    def __init__(self, loader, maxsize=256):
        self.loader = loader
        self.maxsize = maxsize
        self._cache = OrderedDict()

    def get(self, key):
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        value = self.loader(key)
        self._cache[key] = value
        if len(self._cache) > self.maxsize:
            self._cache.popitem(last=False)
        return value


@dataclass
class TrainResult:
    generator: object
    discriminator: object
    log: TrainLog
    baseline_sdr_db: float
    best_val_sdr_db: float
    last_val_sdr_db: float
    best_checkpoint: Path = None
    last_checkpoint: Path = None
    log_path: Path = None


def _normalized_pair(clean, corrupted):
    seg = normalize(corrupted)
    scale = seg.scale
    return (
        np.asarray(seg.samples, dtype=np.float32),
        np.asarray(clean / scale, dtype=np.float32),
    )


def train(manifest_path, cfg, read_pair=None, progress=None, sample_rate=None):
    """Run the full loop over a dataset manifest.

    read_pair(record, base_dir) -> (clean, corrupted) float arrays; the
    default reads the WAV pair. Validation restores every val segment and
    reports mean SDR against the clean reference; the best-validation and
    last checkpoints are written when cfg.checkpoint_dir is set.
    """
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    with open(manifest_path) as f:
        records = [json.loads(line) for line in f if line.strip()]
    train_recs = [r for r in records if r["split"] == "train"]
    val_recs = [r for r in records if r["split"] == "val"]
    if not train_recs or not val_recs:
        raise ConfigurationError(
            f"need nonempty train and val splits, got {len(train_recs)}/{len(val_recs)}"
        )

    if read_pair is None:
        if sample_rate is None:
            sample_rate = read_wav(base / train_recs[0]["clean_path"]).sample_rate

        def read_pair(rec, base_dir):
            clean = read_wav(base_dir / rec["clean_path"]).samples
            corrupted = read_wav(base_dir / rec["corrupted_path"]).samples
            return clean, corrupted

    if sample_rate is None:
        sample_rate = 16000

    def load_train(i):
        clean, corrupted = read_pair(train_recs[i], base)
        return _normalized_pair(clean, corrupted)

    pairs = _PairCache(load_train)
    val_pairs = [read_pair(rec, base) for rec in val_recs]
    baseline = float(np.mean([sdr(c, y) for c, y in val_pairs]))

    rng = np.random.default_rng(cfg.seed)
    g = build_generator(cfg.q_order, rng)
    d = build_discriminator(cfg.q_order, rng)
    g_opt = make_opt_states(g.named_params())
    d_opt = make_opt_states(d.named_params())

    def validate():
        return float(np.mean([sdr(c, restore(y, g)) for c, y in val_pairs]))

    log = TrainLog()
    ckpt_dir = Path(cfg.checkpoint_dir) if cfg.checkpoint_dir else None
    best_val = -np.inf
    best_path = last_path = None
    last_val = None
    iteration = 0
    n = len(train_recs)
    while iteration < cfg.max_iterations:
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            if iteration >= cfg.max_iterations:
                break
            batch = [pairs.get(int(i)) for i in order[start : start + cfg.batch_size]]
            t0 = time.perf_counter()
            report = train_step(batch, g, d, g_opt, d_opt, cfg)
            iteration += 1
            log.add_iteration(iteration, report, time.perf_counter() - t0)
            if progress is not None:
                progress(iteration, report)
            if iteration % cfg.validate_every == 0 or iteration == cfg.max_iterations:
                last_val = validate()
                log.add_validation(iteration, last_val)
                if last_val > best_val:
                    best_val = last_val
                    if ckpt_dir is not None:
                        best_path = save_checkpoint(ckpt_dir / "best.ckpt", g, d, sample_rate)
    if last_val is None:
        last_val = validate()
        log.add_validation(iteration, last_val)
        if last_val > best_val:
            best_val = last_val
            if ckpt_dir is not None:
                best_path = save_checkpoint(ckpt_dir / "best.ckpt", g, d, sample_rate)
    log_path = None
    if ckpt_dir is not None:
        last_path = save_checkpoint(ckpt_dir / "last.ckpt", g, d, sample_rate)
        log_path = ckpt_dir / "train_log.jsonl"
        write_train_log(log, log_path)
    return TrainResult(
        generator=g, discriminator=d, log=log,
        baseline_sdr_db=baseline, best_val_sdr_db=best_val, last_val_sdr_db=last_val,
        best_checkpoint=best_path, last_checkpoint=last_path, log_path=log_path,
    )


def write_train_log(log, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for entry in log.iterations:
            f.write(json.dumps({"kind": "iteration", **entry}) + "\n")
        for entry in log.validations:
            f.write(json.dumps({"kind": "validation", **entry}) + "\n")
    return path
