"""Configuration for fewshotdag."""

from __future__ import annotations

import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Literal, TypeVar

import numpy as np
from pydantic import (
    BaseModel,
    BaseSettings,
    Extra,
    Field,
    ValidationError,
    root_validator,
    validator,
)

from .exceptions import ConfigError

__all__ = [
    "ArchitectureConfig",
    "Config",
    "DataConfig",
    "EvaluationConfig",
    "ExperimentConfig",
    "GenerationConfig",
    "JointTemplate",
    "LossConfig",
    "Strategy",
    "SyntheticShapeSpec",
    "TrainerConfig",
    "format_errors",
    "parse_config",
    "parse_generation_spec",
    "write_snapshot",
]

SNAPSHOT_NAME = "config.json"
"""File name of the resolved configuration written next to run outputs."""

SPLIT_STRIDE = 1_000_000
"""Width of the seed range reserved for each dataset split."""


class Config(BaseSettings):
    """Environment settings for fewshotdag."""

    log_level: str = Field(
        "WARNING",
        description="Python logging level name used by the command line",
    )

    default_output_dir: Path = Field(
        Path("output"),
        description=(
            "Output directory used when an experiment configuration does not"
            " set `output_dir`"
        ),
    )

    class Config:
        env_prefix = "fewshotdag_"


class _StrictModel(BaseModel):
    """Base for configuration sections: immutable, unknown keys rejected."""

    class Config:
        allow_mutation = False
        extra = Extra.forbid


class Strategy(str, Enum):
    """Training strategies, in the order they are reported."""

    supervised_only = "supervised_only"
    pseudo_label = "pseudo_label"
    pi_model = "pi_model"
    temporal_ensemble = "temporal_ensemble"
    mean_teacher = "mean_teacher"
    mean_teacher_js = "mean_teacher_js"


class ArchitectureConfig(_StrictModel):
    """Immutable description of a DAG model.

    Teacher and student parameter sets always share one descriptor, and every
    parameter tensor's shape is derived from it.
    """

    image_size: int = Field(
        64, ge=4, description="Height and width of model input images"
    )

    num_landmarks: int = Field(8, ge=1, description="Number of vertices K")

    encoder_channels: tuple[int, ...] = Field(
        (16, 16, 32, 32), description="Output channels of each conv block"
    )

    encoder_strides: tuple[int, ...] = Field(
        (1, 2, 1, 2), description="Stride (1 or 2) of each conv block"
    )

    gcn_width: int = Field(64, ge=1, description="Width of GCN layers")

    global_layers: int = Field(
        3, ge=1, description="Hidden GCN layers of the global stage"
    )

    local_layers: int = Field(
        3, ge=1, description="Hidden GCN layers of each local stage"
    )

    cascade_steps: int = Field(
        3, ge=1, description="Number T of unshared local stages"
    )

    dtype: Literal["float64", "float32"] = Field(
        "float64", description="Floating point type of parameters and inputs"
    )

    @validator("encoder_strides")
    def _check_strides(
        cls, v: tuple[int, ...], values: dict[str, Any]
    ) -> tuple[int, ...]:
        if any(s not in (1, 2) for s in v):
            raise ValueError("strides must be 1 or 2")
        channels = values.get("encoder_channels")
        if channels is not None and len(channels) != len(v):
            raise ValueError("need one stride per encoder block")
        if not v:
            raise ValueError("encoder needs at least one block")
        return v

    @property
    def numpy_dtype(self) -> np.dtype[Any]:
        """Numpy type corresponding to ``dtype``."""
        return np.dtype(self.dtype)

    @property
    def feature_channels(self) -> int:
        """Channel count C of the feature map."""
        return self.encoder_channels[-1]

    @property
    def feature_size(self) -> int:
        """Spatial size H' = W' of the feature map."""
        size = self.image_size
        for stride in self.encoder_strides:
            size = math.ceil(size / stride)
        return size

    @property
    def output_stride(self) -> int:
        """Product of the encoder strides."""
        return math.prod(self.encoder_strides)


class LossConfig(_StrictModel):
    """Weights and constants of the training objectives."""

    m: float = Field(
        0.01, ge=0, description="Margin of the global hinge, normalized units"
    )

    w1: float = Field(1.0, ge=0, description="Weight of the local loss")

    w2: float = Field(1.0, ge=0, description="Weight of the JS loss")

    kl_epsilon: float = Field(
        1e-8, gt=0, le=1e-6, description="Probability floor inside KL"
    )

    supervise_all_steps: bool = Field(
        False,
        description=(
            "Also apply the local loss to every intermediate cascade step"
        ),
    )


class TrainerConfig(_StrictModel):
    """Settings of the training engine."""

    strategy: Strategy = Field(
        Strategy.mean_teacher_js, description="Training strategy"
    )

    ratio: int = Field(
        100,
        alias="R",
        ge=1,
        description="Unlabeled batches per labeled batch",
    )

    lr: float = Field(1e-4, gt=0, description="Initial learning rate")

    lr_decay: float = Field(
        0.96, ge=0, le=1, description="Learning rate decay factor"
    )

    decay_every: int = Field(
        10, ge=1, description="Epochs between learning rate decays"
    )

    weight_decay: float = Field(
        1e-4, ge=0, description="Decoupled weight decay"
    )

    noise_sigma: float = Field(
        0.1, ge=0, description="Std of the Gaussian noise on student input"
    )

    batch_size: int | None = Field(
        None,
        ge=1,
        description=(
            "Batch size; if unset, 1, 4 or 8 depending on the number of"
            " labeled samples"
        ),
    )

    pretrain_epochs: int = Field(
        200, ge=0, description="Epochs of supervised pretraining"
    )

    epochs: int = Field(
        20, ge=0, description="Epochs of semi-supervised training"
    )

    ema_alpha: float = Field(
        0.99, ge=0, le=1, description="EMA factor of the temporal ensemble"
    )

    loader_workers: int = Field(
        0, ge=0, description="Threads preparing batches, 0 for inline"
    )

    augment: bool = Field(True, description="Augment training batches")

    rng_seed: int = Field(
        0, ge=0, description="Seed of shuffling, augmentation and noise"
    )

    class Config:
        allow_population_by_field_name = True


class EvaluationConfig(_StrictModel):
    """Settings of the evaluation metrics and outputs."""

    failure_fraction: float = Field(
        0.05,
        gt=0,
        description="Failure threshold as a fraction of the image width",
    )

    std: Literal["population", "sample"] = Field(
        "population", description="Which standard deviation to report"
    )

    use_teacher: bool = Field(
        True, description="Evaluate the teacher when the run has one"
    )

    overlay_count: int = Field(
        4, ge=0, description="Number of test overlays written by `overlay`"
    )

    @property
    def ddof(self) -> int:
        """Delta degrees of freedom for `numpy.std`."""
        return 0 if self.std == "population" else 1


class JointTemplate(_StrictModel):
    """One joint of the synthetic figure skeleton."""

    name: str = Field(..., description="Joint name")

    parent: int | None = Field(
        ..., ge=0, description="Index of an earlier joint, unset for the root"
    )

    length: tuple[float, float] = Field(
        (0.0, 0.0), description="Limb length range to the parent"
    )

    angle: tuple[float, float] = Field(
        (0.0, 0.0),
        description="Limb direction range in degrees, y pointing down",
    )

    @validator("length", "angle")
    def _check_range(cls, v: tuple[float, float]) -> tuple[float, float]:
        if v[0] > v[1]:
            raise ValueError(f"range {v} is reversed")
        return v


def _default_template() -> tuple[JointTemplate, ...]:
    joints = [
        ("pelvis", None, (0.0, 0.0), (0.0, 0.0)),
        ("neck", 0, (1.0, 1.2), (-100.0, -80.0)),
        ("head", 1, (0.35, 0.45), (-100.0, -80.0)),
        ("left_elbow", 1, (0.45, 0.6), (110.0, 170.0)),
        ("left_hand", 3, (0.4, 0.55), (60.0, 150.0)),
        ("right_hand", 1, (0.8, 1.1), (10.0, 70.0)),
        ("left_foot", 0, (0.9, 1.2), (95.0, 125.0)),
        ("right_foot", 0, (0.9, 1.2), (55.0, 85.0)),
    ]
    return tuple(
        JointTemplate(name=n, parent=p, length=ln, angle=a)
        for n, p, ln, a in joints
    )


class SyntheticShapeSpec(_StrictModel):
    """Layout and rendering ranges of the synthetic stick figures."""

    num_landmarks: int = Field(8, ge=3, description="Landmark count K")

    template: tuple[JointTemplate, ...] = Field(
        default_factory=_default_template,
        description="Joints in order; each parent precedes its children",
    )

    stroke_width: tuple[float, float] = Field(
        (1.5, 3.0), description="Limb stroke width range in pixels"
    )

    intensity: tuple[float, float] = Field(
        (0.6, 1.0), description="Figure intensity range"
    )

    noise_level: float = Field(
        0.05, ge=0, description="Std of the background noise"
    )

    image_size: int = Field(64, ge=4, description="Image height and width")

    margin: float = Field(
        0.1, ge=0, lt=0.5, description="Border kept free of landmarks"
    )

    @validator("stroke_width", "intensity")
    def _check_range(cls, v: tuple[float, float]) -> tuple[float, float]:
        if v[0] > v[1] or v[0] <= 0:
            raise ValueError(f"range {v} must be positive and ordered")
        return v

    @validator("template")
    def _check_template(
        cls, v: tuple[JointTemplate, ...]
    ) -> tuple[JointTemplate, ...]:
        if not v or v[0].parent is not None:
            raise ValueError("first joint must be the root")
        for index, joint in enumerate(v[1:], start=1):
            if joint.parent is None or joint.parent >= index:
                msg = f"joint {joint.name} must follow its parent"
                raise ValueError(msg)
        return v

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Limbs as ``(parent, child)`` vertex pairs."""
        return tuple(
            (j.parent, i)
            for i, j in enumerate(self.template)
            if j.parent is not None
        )


class GenerationConfig(_StrictModel):
    """How to generate a synthetic dataset."""

    labeled: int = Field(5, ge=0, le=SPLIT_STRIDE)

    unlabeled: int = Field(500, ge=0, le=SPLIT_STRIDE)

    validation: int = Field(20, ge=0, le=SPLIT_STRIDE)

    test: int = Field(200, ge=0, le=SPLIT_STRIDE)

    seed: int = Field(0, ge=0, description="Dataset seed")

    shape: SyntheticShapeSpec = Field(
        default_factory=SyntheticShapeSpec, description="Figure layout"
    )


class DataConfig(_StrictModel):
    """Where the experiment's samples come from."""

    path: Path | None = Field(
        None,
        description=(
            "Existing dataset directory; if unset, the dataset is generated"
        ),
    )

    generation: GenerationConfig = Field(
        default_factory=GenerationConfig,
        description="Generation settings, used when `path` is unset",
    )

    @validator("path")
    def _check_path(cls, v: Path | None) -> Path | None:
        if v is not None and not v.is_dir():
            raise ValueError(f"dataset directory {v} does not exist")
        return v


class ExperimentConfig(_StrictModel):
    """Complete description of one reproducible experiment."""

    data: DataConfig = Field(default_factory=DataConfig)

    architecture: ArchitectureConfig = Field(
        default_factory=ArchitectureConfig
    )

    loss: LossConfig = Field(default_factory=LossConfig)

    trainer: TrainerConfig = Field(default_factory=TrainerConfig)

    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)

    output_dir: Path = Field(
        default_factory=lambda: Config().default_output_dir,
        description="Directory that receives every output of the run",
    )

    seed: int = Field(0, ge=0, description="Seed of model initialization")

    @root_validator(skip_on_failure=True)
    def _check_sizes(cls, values: dict[str, Any]) -> dict[str, Any]:
        data: DataConfig = values["data"]
        architecture: ArchitectureConfig = values["architecture"]
        if data.path is None:
            shape = data.generation.shape
            if shape.num_landmarks != architecture.num_landmarks:
                msg = (
                    f"generated figures have {shape.num_landmarks} landmarks"
                    f" but the model expects {architecture.num_landmarks}"
                )
                raise ValueError(msg)
            if shape.image_size != architecture.image_size:
                msg = (
                    f"generated images are {shape.image_size} pixels but the"
                    f" model expects {architecture.image_size}"
                )
                raise ValueError(msg)
        return values


def format_errors(error: ValidationError) -> str:
    """Condense a validation error into one line naming each bad key."""
    parts = []
    for entry in error.errors():
        location = ".".join(str(p) for p in entry["loc"])
        parts.append(f"{location}: {entry['msg']}")
    return "; ".join(parts)


_ModelT = TypeVar("_ModelT", bound=BaseModel)


def _parse_file(path: Path, model: type[_ModelT]) -> _ModelT:
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"Configuration file {path} not found") from e
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read configuration {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"Configuration {path} must be a JSON object")
    try:
        return model.parse_obj(raw)
    except ValidationError as e:
        msg = f"Invalid configuration {path}: {format_errors(e)}"
        raise ConfigError(msg) from e


def parse_config(path: Path | None) -> ExperimentConfig:
    """Load an experiment configuration.

    Parameters
    ----------
    path
        JSON configuration file. If `None`, every setting takes its default.

    Returns
    -------
    ExperimentConfig
        Resolved configuration.

    Raises
    ------
    ConfigError
        Raised if the file is missing, is not JSON, or does not match the
        schema. The message names the offending key.
    """
    if path is None:
        return ExperimentConfig()
    return _parse_file(path, ExperimentConfig)


def parse_generation_spec(path: Path | None) -> GenerationConfig:
    """Load the settings of a synthetic dataset.

    The file holds the ``data.generation`` section of an experiment
    configuration on its own. Errors are reported as by `parse_config`.
    """
    if path is None:
        return GenerationConfig()
    return _parse_file(path, GenerationConfig)


def write_snapshot(config: BaseModel, directory: Path) -> Path:
    """Write a configuration with all defaults filled in.

    Parameters
    ----------
    config
        Configuration to record.
    directory
        Directory to write ``config.json`` into. Created if necessary.

    Returns
    -------
    pathlib.Path
        Path to the snapshot.
    """
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / SNAPSHOT_NAME
    path.write_text(config.json(by_alias=True, indent=2) + "\n")
    return path
