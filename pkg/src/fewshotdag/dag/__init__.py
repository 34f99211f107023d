"""The deep adaptive graph landmark model."""

from .encoder import extract_features
from .forward import DagOutput, dag_forward, image_batch, predict_landmarks
from .graph import (
    apply_affine,
    compute_mean_shape,
    gcn_layer,
    sample_vertex_features,
    vertex_inputs,
)
from .params import DagModelParams, GcnWeights, expected_shapes

__all__ = [
    "DagModelParams",
    "DagOutput",
    "GcnWeights",
    "apply_affine",
    "compute_mean_shape",
    "dag_forward",
    "expected_shapes",
    "extract_features",
    "gcn_layer",
    "image_batch",
    "predict_landmarks",
    "sample_vertex_features",
    "vertex_inputs",
]
