"""Optimisation loop, checkpoints and evaluation."""
from .config import ConfigError, Mode, TrainConfig, load_train_config
from .evaluation import (DEFAULT_ALPHAS, Condition, evaluate, output_for, process, read_table, summarize,
                         write_table)
from .optim import AdamState, adam_step, clip_gradients, global_norm, lr_at
from .trainer import (Batch, StepReport, Trainer, TrainingDiverged, compute_losses, fit_uncertainty,
                      fixed_source, load_processor, read_checkpoint, stream_source)

__all__ = [
    "AdamState", "Batch", "Condition", "ConfigError", "DEFAULT_ALPHAS", "Mode", "StepReport", "TrainConfig",
    "Trainer", "TrainingDiverged", "adam_step", "clip_gradients", "compute_losses", "evaluate",
    "fit_uncertainty", "fixed_source", "global_norm", "load_processor", "load_train_config", "lr_at",
    "output_for", "process", "read_checkpoint", "read_table", "stream_source", "summarize", "write_table",
]
