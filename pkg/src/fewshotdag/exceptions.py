"""Exceptions for fewshotdag."""

from __future__ import annotations

__all__ = [
    "CheckpointFormatError",
    "CheckpointVersionError",
    "ConfigError",
    "DatasetFormatError",
    "DatasetVersionError",
    "FewShotDagError",
    "InvalidArgumentError",
    "OutputPathError",
]


class FewShotDagError(Exception):
    """Base class for all fewshotdag errors."""


class InvalidArgumentError(FewShotDagError, ValueError):
    """An argument violates the precondition of an operation."""


class ConfigError(FewShotDagError):
    """The experiment configuration is missing or invalid."""


class DatasetFormatError(FewShotDagError):
    """A dataset directory is missing files or has a corrupt manifest."""


class DatasetVersionError(FewShotDagError):
    """A dataset manifest declares an unsupported format version."""


class CheckpointFormatError(FewShotDagError):
    """A checkpoint file is truncated or does not parse."""


class CheckpointVersionError(FewShotDagError):
    """A checkpoint file declares an unsupported format version.

    No tensors are read from a checkpoint whose version is not understood.
    """


class OutputPathError(FewShotDagError):
    """An output path escapes the configured output directory."""
