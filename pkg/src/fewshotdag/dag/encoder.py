"""Convolutional feature extractor."""

from __future__ import annotations

from ..diffcore import Tensor, conv2d, relu, reshape
from ..exceptions import InvalidArgumentError
from .params import DagModelParams

__all__ = ["extract_features"]


def extract_features(image: Tensor, params: DagModelParams) -> Tensor:
    """Encode images as feature maps.

    Each encoder block is a 3×3 convolution followed by relu.

    Parameters
    ----------
    image
        One image of shape ``1×H×W`` or a batch of shape ``B×1×H×W``, with
        ``H`` and ``W`` equal to the configured image size.
    params
        Model parameters.

    Returns
    -------
    Tensor
        Feature map of shape ``C×H'×W'`` (or ``B×C×H'×W'`` for a batch),
        where ``H'`` is ``H`` divided by the encoder's output stride.

    Raises
    ------
    InvalidArgumentError
        Raised if the image shape does not match the architecture.
    """
    architecture = params.architecture
    size = architecture.image_size
    batched = image.ndim == 4
    if image.ndim not in (3, 4) or image.shape[-3:] != (1, size, size):
        msg = (
            f"Expected images of shape [B×]1×{size}×{size},"
            f" not {image.shape}"
        )
        raise InvalidArgumentError(msg)
    if image.dtype != architecture.numpy_dtype:
        image = Tensor(image.data, dtype=architecture.numpy_dtype)

    x = image if batched else reshape(image, (1, *image.shape))
    for index, stride in enumerate(architecture.encoder_strides):
        weight, bias = params.conv_block(index)
        x = relu(conv2d(x, weight, bias, stride=stride))
    return x if batched else reshape(x, x.shape[1:])
