"""Flat key=value run configuration files.

Lines are `key = value`; blank lines and #-comments are ignored. Unknown keys
are rejected so typos fail loudly. Path values are resolved relative to the
config file's directory.
"""

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigurationError

_INT_KEYS = ("q_order", "batch_size", "max_iterations", "seed", "validate_every")
_FLOAT_KEYS = ("lr_g", "lr_d", "lambda_td", "lambda_fd", "sdr_min", "sdr_max")
_PATH_KEYS = ("manifest", "clean_dir", "rir_dir", "mixture_dir", "out_dir",
              "checkpoint_dir", "restored_dir", "report")
_STR_KEYS = ("composition", "metrics")


@dataclass
class RunConfig:
    q_order: int = None
    batch_size: int = None
    max_iterations: int = None
    seed: int = None
    validate_every: int = None
    lr_g: float = None
    lr_d: float = None
    lambda_td: float = None
    lambda_fd: float = None
    sdr_min: float = None
    sdr_max: float = None
    manifest: Path = None
    clean_dir: Path = None
    rir_dir: Path = None
    mixture_dir: Path = None
    out_dir: Path = None
    checkpoint_dir: Path = None
    restored_dir: Path = None
    report: Path = None
    composition: str = None
    metrics: str = None

    def train_overrides(self):
        """Non-None fields that map onto training settings."""
        names = ("q_order", "batch_size", "max_iterations", "seed",
                 "validate_every", "lr_g", "lr_d", "lambda_td", "lambda_fd")
        return {n: getattr(self, n) for n in names if getattr(self, n) is not None}


_ALL_KEYS = {f.name for f in fields(RunConfig)}
assert _ALL_KEYS == set(_INT_KEYS) | set(_FLOAT_KEYS) | set(_PATH_KEYS) | set(_STR_KEYS)


def parse_config_file(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}")
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _ALL_KEYS:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            if key in _INT_KEYS:
                parsed = int(value)
            elif key in _FLOAT_KEYS:
                parsed = float(value)
            elif key in _PATH_KEYS:
                p = Path(value)
                parsed = p if p.is_absolute() else (path.parent / p)
            else:
                parsed = value
        except ValueError:
            raise ConfigurationError(f"{path}:{lineno}: bad value for {key}: {value!r}")
        setattr(cfg, key, parsed)
    return cfg
