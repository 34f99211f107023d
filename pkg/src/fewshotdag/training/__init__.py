"""Training engine: schedules, optimizer, EMA, loops and checkpoints."""

from .batches import Batch, BatchLoader, prefetch
from .checkpoint import Checkpoint, read_checkpoint, write_checkpoint
from .ema import ema_update
from .optimizer import OptimizerState, adam_step
from .schedule import (
    BatchSlot,
    alpha_schedule,
    build_batch_schedule,
    default_batch_size,
    lr_at_epoch,
)
from .trainer import PretrainResult, SslTrainer, TrainingResult

__all__ = [
    "Batch",
    "BatchLoader",
    "BatchSlot",
    "Checkpoint",
    "OptimizerState",
    "PretrainResult",
    "SslTrainer",
    "TrainingResult",
    "adam_step",
    "alpha_schedule",
    "build_batch_schedule",
    "default_batch_size",
    "ema_update",
    "lr_at_epoch",
    "prefetch",
    "read_checkpoint",
    "write_checkpoint",
]
