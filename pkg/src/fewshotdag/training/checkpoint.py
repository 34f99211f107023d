"""Binary checkpoint files.

A checkpoint is laid out as:

#. the 8-byte magic ``FSDAGCKP``
#. the format version as a little-endian uint32
#. the header length in bytes as a little-endian uint32
#. the UTF-8 JSON header
#. every tensor listed in the header, in order, as little-endian float32
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, Extra, ValidationError

from ..config import ArchitectureConfig, format_errors
from ..dag.params import DagModelParams
from ..diffcore import Array, Tensor
from ..exceptions import CheckpointFormatError, CheckpointVersionError
from ..models.landmarks import MeanShape
from .optimizer import OptimizerState

__all__ = [
    "CHECKPOINT_MAGIC",
    "CHECKPOINT_VERSION",
    "Checkpoint",
    "read_checkpoint",
    "write_checkpoint",
]

CHECKPOINT_MAGIC = b"FSDAGCKP"
CHECKPOINT_VERSION = 1

_PREAMBLE = struct.Struct("<8sII")
_TENSOR_DTYPE = np.dtype("<f4")


@dataclass
class Checkpoint:
    """Everything needed to resume training or run inference."""

    student: DagModelParams
    """Parameters trained by the optimizer."""

    mean_shape: MeanShape
    """Starting shape of the graph evolution."""

    edges: tuple[tuple[int, int], ...]
    """Landmark graph edges."""

    teacher: DagModelParams | None = None
    """EMA parameters, if the strategy has a teacher."""

    optimizer: OptimizerState | None = None
    """Moment estimates of the student's optimizer."""

    step: int = 0
    """Global step counter."""

    strategy: str | None = None
    """Strategy that produced the parameters."""

    @property
    def architecture(self) -> ArchitectureConfig:
        """Architecture shared by student and teacher."""
        return self.student.architecture

    def inference_params(self, *, use_teacher: bool = True) -> DagModelParams:
        """Return the teacher if requested and present, else the student."""
        if use_teacher and self.teacher is not None:
            return self.teacher
        return self.student


class _TensorEntry(BaseModel):
    name: str
    shape: tuple[int, ...]

    class Config:
        extra = Extra.forbid


class _Header(BaseModel):
    architecture: ArchitectureConfig
    mean_shape: list[tuple[float, float]]
    edges: list[tuple[int, int]]
    step: int
    strategy: str | None
    optimizer: dict[str, float] | None
    tensors: list[_TensorEntry]

    class Config:
        extra = Extra.forbid


def _tensor_table(checkpoint: Checkpoint) -> list[tuple[str, Array]]:
    student = checkpoint.student.named_parameters()
    table = [(f"student/{n}", t.data) for n, t in student]
    if checkpoint.teacher is not None:
        table.extend(
            (f"teacher/{n}", t.data)
            for n, t in checkpoint.teacher.named_parameters()
        )
    if checkpoint.optimizer is not None:
        names = list(checkpoint.student)
        opt = checkpoint.optimizer
        table.extend(
            (f"adam.first/{n}", a)
            for n, a in zip(names, opt.first, strict=True)
        )
        table.extend(
            (f"adam.second/{n}", a)
            for n, a in zip(names, opt.second, strict=True)
        )
    return table


def write_checkpoint(path: Path, checkpoint: Checkpoint) -> None:
    """Write a checkpoint file.

    Parameters
    ----------
    path
        File to create or overwrite.
    checkpoint
        Contents to store. Tensors are stored as float32.
    """
    table = _tensor_table(checkpoint)
    optimizer = None
    if checkpoint.optimizer is not None:
        opt = checkpoint.optimizer
        optimizer = {
            "step": opt.step,
            "beta1": opt.beta1,
            "beta2": opt.beta2,
            "eps": opt.eps,
        }
    header = _Header(
        architecture=checkpoint.architecture,
        mean_shape=checkpoint.mean_shape.to_list(),
        edges=list(checkpoint.edges),
        step=checkpoint.step,
        strategy=checkpoint.strategy,
        optimizer=optimizer,
        tensors=[_TensorEntry(name=n, shape=a.shape) for n, a in table],
    )
    encoded = header.json().encode()
    with path.open("wb") as f:
        preamble = _PREAMBLE.pack(
            CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(encoded)
        )
        f.write(preamble)
        f.write(encoded)
        for _, array in table:
            f.write(array.astype(_TENSOR_DTYPE).tobytes())
    logging.info(f"Wrote checkpoint {path} at step {checkpoint.step}")


def _parse_header(raw: bytes) -> _Header:
    try:
        data: Any = json.loads(raw.decode())
        return _Header.parse_obj(data)
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError("Checkpoint header is not JSON") from e
    except ValidationError as e:
        msg = f"Invalid checkpoint header: {format_errors(e)}"
        raise CheckpointFormatError(msg) from e


def read_checkpoint(path: Path) -> Checkpoint:
    """Read a checkpoint file.

    Tensors are converted to the floating point type of the stored
    architecture.

    Raises
    ------
    CheckpointFormatError
        Raised if the file is truncated, has trailing data or does not
        parse.
    CheckpointVersionError
        Raised if the file declares another format version.
    """
    data = path.read_bytes()
    if len(data) < _PREAMBLE.size:
        raise CheckpointFormatError(f"{path} is too short for a checkpoint")
    magic, version, length = _PREAMBLE.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path} is not a checkpoint")
    if version != CHECKPOINT_VERSION:
        msg = (
            f"Checkpoint version {version} is not supported"
            f" (expected {CHECKPOINT_VERSION})"
        )
        raise CheckpointVersionError(msg)
    start = _PREAMBLE.size
    if len(data) < start + length:
        raise CheckpointFormatError(f"{path} has a truncated header")
    header = _parse_header(data[start : start + length])

    offset = start + length
    arrays: dict[str, Array] = {}
    dtype = header.architecture.numpy_dtype
    for entry in header.tensors:
        count = int(np.prod(entry.shape, dtype=np.int64))
        size = count * _TENSOR_DTYPE.itemsize
        if offset + size > len(data):
            raise CheckpointFormatError(f"{path} is truncated at {entry.name}")
        values = np.frombuffer(data, _TENSOR_DTYPE, count, offset)
        arrays[entry.name] = values.reshape(entry.shape).astype(dtype)
        offset += size
    if offset != len(data):
        raise CheckpointFormatError(f"{path} has trailing data")
    return _assemble(header, arrays, path)


def _params(
    architecture: ArchitectureConfig,
    arrays: dict[str, Array],
    prefix: str,
    path: Path,
) -> DagModelParams | None:
    selected = {
        name.removeprefix(prefix): Tensor(array, requires_grad=True)
        for name, array in arrays.items()
        if name.startswith(prefix)
    }
    if not selected:
        return None
    try:
        return DagModelParams(architecture, selected)
    except ValueError as e:
        raise CheckpointFormatError(f"{path}: {e}") from e


def _assemble(
    header: _Header, arrays: dict[str, Array], path: Path
) -> Checkpoint:
    architecture = header.architecture
    student = _params(architecture, arrays, "student/", path)
    if student is None:
        raise CheckpointFormatError(f"{path} has no student parameters")
    teacher = _params(architecture, arrays, "teacher/", path)

    optimizer = None
    if header.optimizer is not None:
        names = list(student)
        try:
            first = [arrays[f"adam.first/{n}"] for n in names]
            second = [arrays[f"adam.second/{n}"] for n in names]
        except KeyError as e:
            msg = f"{path} is missing optimizer state {e}"
            raise CheckpointFormatError(msg) from e
        optimizer = OptimizerState(
            first=first,
            second=second,
            step=int(header.optimizer["step"]),
            beta1=header.optimizer["beta1"],
            beta2=header.optimizer["beta2"],
            eps=header.optimizer["eps"],
        )
    return Checkpoint(
        student=student,
        mean_shape=MeanShape(header.mean_shape),
        edges=tuple(header.edges),
        teacher=teacher,
        optimizer=optimizer,
        step=header.step,
        strategy=header.strategy,
    )
