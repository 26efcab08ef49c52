"""Command-line interface: corrupt / train / restore / eval / info.

Exit codes: 0 success, 2 configuration errors, 3 input or I/O errors
(including corruption retry exhaustion), 4 training divergence.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import backend
from .audio_io import read_wav, write_wav
from .config import RunConfig, parse_config_file
from .corruption import (
    CONDITIONS,
    DatasetComposition,
    build_dataset,
    load_artifact_bank,
)
from .errors import ConfigurationError, DivergenceError, InputError, RetryError
from .metrics import METRIC_NAMES, evaluate_set, write_report
from .models import count_params
from .trainer import TrainConfig, load_checkpoint, restore, train


def _sdr_histogram(values, lo=-6.0, hi=6.0, bins=12):
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(values, bins=edges)
    lines = []
    for i, c in enumerate(counts):
        label = f"[{edges[i]:+.0f},{edges[i + 1]:+.0f})"
        lines.append(f"  {label:>9} {'#' * int(c)} {int(c)}")
    return "\n".join(lines)


def cmd_corrupt(args):
    run = parse_config_file(args.config) if args.config else RunConfig()
    clean_dir = args.clean_dir or run.clean_dir
    out_dir = args.out_dir or run.out_dir
    if clean_dir is None or out_dir is None:
        raise ConfigurationError("corrupt needs --clean-dir and --out-dir")
    rir_dir = args.rir_dir or run.rir_dir
    mixture_dir = args.mixture_dir or run.mixture_dir
    comp_text = args.composition or run.composition
    comp = (DatasetComposition.parse(comp_text) if comp_text
            else DatasetComposition.default())
    bank = load_artifact_bank(rir_dir, mixture_dir)
    result = build_dataset(
        clean_dir, out_dir, bank, comp, args.seed,
        sdr_min=args.sdr_min, sdr_max=args.sdr_max,
    )
    for name in result.skipped_files:
        print(f"warning: skipped unreadable {name}", file=sys.stderr)
    by_condition = {c: 0 for c in CONDITIONS}
    for rec in result.records:
        by_condition[rec["condition"]] += 1
    counts = " ".join(f"{c}={n}" for c, n in by_condition.items() if n)
    print(f"wrote {len(result.records)} records to {result.manifest_path}")
    print(f"condition counts: {counts}")
    print("SDR histogram (dB):")
    print(_sdr_histogram([rec["achieved_sdr_db"] for rec in result.records]))
    total_files = len(list(Path(clean_dir).glob("*.wav")))
    if total_files and len(result.skipped_files) > 0.1 * total_files:
        print(
            f"error: skipped {len(result.skipped_files)} of {total_files} files",
            file=sys.stderr,
        )
        return 3
    return 0


def cmd_train(args):
    run = parse_config_file(args.config) if args.config else RunConfig()
    manifest = args.manifest or run.manifest
    out = args.out or run.checkpoint_dir
    if manifest is None:
        raise ConfigurationError("train needs --manifest (flag or config)")
    if out is None:
        raise ConfigurationError("train needs --out (flag or config checkpoint_dir)")
    overrides = run.train_overrides()
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.iterations is not None:
        overrides["max_iterations"] = args.iterations
    cfg = TrainConfig(checkpoint_dir=str(out), **overrides)

    def progress(iteration, report):
        if iteration % 10 == 0 or iteration == 1:
            print(
                f"iter {iteration:5d}  d={report.d_loss:.4f} adv={report.g_adv:.4f} "
                f"td={report.loss_td:.5f} fd={report.loss_fd:.4f} total={report.total:.4f}"
            )

    result = train(manifest, cfg, progress=progress)
    print(f"baseline corrupted SDR: {result.baseline_sdr_db:+.2f} dB")
    print(f"final validation SDR:   {result.last_val_sdr_db:+.2f} dB")
    print(f"best validation SDR:    {result.best_val_sdr_db:+.2f} dB")
    print(f"checkpoints: {result.best_checkpoint} {result.last_checkpoint}")
    print(f"log: {result.log_path}")
    return 0


def cmd_restore(args):
    g, _, train_rate = load_checkpoint(args.checkpoint)
    wav = read_wav(args.input)
    if wav.sample_rate != train_rate:
        print(
            f"warning: input is {wav.sample_rate} Hz but the model was trained "
            f"at {train_rate} Hz; restoring anyway",
            file=sys.stderr,
        )
    restored = restore(wav.samples, g)
    write_wav(args.output, restored, wav.sample_rate)
    print(f"restored {wav.samples.shape[0]} samples -> {args.output}")
    return 0


def cmd_eval(args):
    names = tuple(m.strip() for m in args.metrics.split(",") if m.strip())
    for m in names:
        if m not in METRIC_NAMES:
            raise ConfigurationError(
                f"unknown metric {m!r}; choose from {', '.join(METRIC_NAMES)}"
            )
    report = evaluate_set(args.manifest, args.restored_dir, names)
    json_path, csv_path = write_report(report, args.report)
    for split, entry in report.summary.items():
        for name in names:
            vals = entry[name]
            print(
                f"{split:>6} {name:>7}: corrupted {vals['corrupted_mean']:+8.3f}  "
                f"restored {vals['restored_mean']:+8.3f}  (n={entry['count']})"
            )
    print(f"report: {json_path} {csv_path}")
    if report.errors:
        for err in report.errors:
            print(f"error: {err['error']}", file=sys.stderr)
        return 3
    return 0


def cmd_info(args):
    g, d, train_rate = load_checkpoint(args.checkpoint)
    g_params = g.named_params()
    d_params = d.named_params()
    g_count = count_params(g_params)
    d_count = count_params(d_params)
    print(f"backend: {backend.backend_name()}")
    print(f"polynomial degree (Q): {g.degree}")
    print(f"training sample rate: {train_rate} Hz")
    print("generator layers:")
    for name, p in g_params.items():
        if name.endswith(".weight"):
            print(f"  {name:14} {'x'.join(str(s) for s in p.shape)}")
    print("discriminator layers:")
    for name, p in d_params.items():
        if name.endswith(".weight"):
            print(f"  {name:14} {'x'.join(str(s) for s in p.shape)}")
    print(f"params: generator={g_count} discriminator={d_count} "
          f"total={g_count + d_count}")
    second = np.asarray(train_rate, dtype=np.int64)
    probe = 0.1 * np.sin(2.0 * np.pi * 440.0 * np.arange(int(second)) / float(second))
    for _ in range(2):
        restore(probe, g)
    runs = max(10, args.runs)
    t0 = time.perf_counter()
    for _ in range(runs):
        restore(probe, g)
    per_run_ms = 1000.0 * (time.perf_counter() - t0) / runs
    print(f"restore time: {per_run_ms:.1f} ms per second of audio "
          f"({runs} runs, 2 warmups)")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="opgan",
        description="Blind audio restoration: corrupt, train, restore, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corrupt", help="build a corrupted dataset from clean WAVs")
    p.add_argument("--clean-dir", type=Path)
    p.add_argument("--rir-dir", type=Path)
    p.add_argument("--mixture-dir", type=Path)
    p.add_argument("--out-dir", type=Path)
    p.add_argument("--composition",
                   help="counts like 'all:4,awgn:2,mix:2,reverb:2' or 'val:all:3'")
    p.add_argument("--sdr-min", type=float, default=-6.0)
    p.add_argument("--sdr-max", type=float, default=6.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=Path)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("train", help="train the restoration model")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, help="checkpoint directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--iterations", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("restore", help="restore a WAV through a trained model")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", dest="output", type=Path, required=True)
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("eval", help="score corrupted and restored audio")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--restored-dir", type=Path, required=True)
    p.add_argument("--metrics", default=",".join(METRIC_NAMES))
    p.add_argument("--report", type=Path, required=True,
                   help="report base path; .json and .csv are written")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("info", help="inspect a checkpoint and time restoration")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--runs", type=int, default=10)
    p.set_defaults(func=cmd_info)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (InputError, RetryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
