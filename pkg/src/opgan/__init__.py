"""Blind audio restoration with operational (polynomial) convolutional GANs.

The public surface: model construction and training, the corruption pipeline
for building benchmark datasets, objective quality metrics, and WAV I/O.
"""

from .backend import backend_name, compiled_available
from .corruption import (
    ArtifactBank,
    CorruptionRecipe,
    DatasetComposition,
    build_dataset,
    corrupt_segment,
    load_artifact_bank,
    synth_test_rir,
)
from .errors import (
    ConfigurationError,
    DivergenceError,
    InputError,
    OpganError,
    RetryError,
)
from .metrics import evaluate_set, fwssnr, sdr, segsnr, stoi
from .models import build_discriminator, build_generator, count_params
from .trainer import (
    TrainConfig,
    load_checkpoint,
    restore,
    save_checkpoint,
    train,
    train_step,
)

__version__ = "0.1.0"

__all__ = [
    "ArtifactBank",
    "ConfigurationError",
    "CorruptionRecipe",
    "DatasetComposition",
    "DivergenceError",
    "InputError",
    "OpganError",
    "RetryError",
    "TrainConfig",
    "backend_name",
    "build_dataset",
    "build_discriminator",
    "build_generator",
    "compiled_available",
    "corrupt_segment",
    "count_params",
    "evaluate_set",
    "fwssnr",
    "load_artifact_bank",
    "load_checkpoint",
    "restore",
    "save_checkpoint",
    "sdr",
    "segsnr",
    "stoi",
    "synth_test_rir",
    "train",
    "train_step",
    "__version__",
]
