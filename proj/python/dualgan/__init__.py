"""Dual-critic Wasserstein GAN for face frontalization."""

from ._core import (
    CheckpointError,
    DeskRun,
    ManifestError,
    NumericError,
    ShapeError,
    critic_loss,
    generator_partial_loss,
    pack2x2,
    read_checkpoint,
    resolved_config,
    schedule_decision,
    shape_report,
    synth,
    unpack2x2,
)

__all__ = [
    "CheckpointError",
    "DeskRun",
    "ManifestError",
    "NumericError",
    "ShapeError",
    "critic_loss",
    "generator_partial_loss",
    "pack2x2",
    "read_checkpoint",
    "resolved_config",
    "schedule_decision",
    "shape_report",
    "synth",
    "unpack2x2",
]
