"""Python bindings for the AttFC head."""

import json

from ._core import (
    ConfigError,
    Dcc,
    Error,
    MarginConfig,
    NumericalError,
    SimilarityMode,
    Trainer as _Trainer,
    batch_loss,
    bench_csv,
    build_gcc,
    cosine_lr,
    dcc_capacity,
    head_param_count,
    logits,
    masked_probabilities,
    run_cli,
    run_gradcheck,
    softmax,
)

__all__ = [
    "ConfigError",
    "Dcc",
    "Error",
    "MarginConfig",
    "NumericalError",
    "SimilarityMode",
    "Trainer",
    "batch_loss",
    "bench_csv",
    "build_gcc",
    "cosine_lr",
    "dcc_capacity",
    "head_param_count",
    "logits",
    "masked_probabilities",
    "run_cli",
    "run_gradcheck",
    "softmax",
]


def Trainer(config=None, overrides=()):
    """Build a trainer from a config dict (or JSON text) plus KEY=VALUE overrides."""
    text = config if isinstance(config, str) else json.dumps(config or {})
    return _Trainer(text, list(overrides))


Trainer.resume = _Trainer.resume
