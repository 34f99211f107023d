"""Primitive differentiable operations.

Each operation is a small `~fewshotdag.diffcore.tensor.Function` subclass plus
a module-level function that applies it. The set is deliberately closed: it
covers the DAG forward pass and the training losses and nothing else, so
broadcasting is only supported for elementwise arithmetic.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import ArrayLike

from ..exceptions import InvalidArgumentError
from .tensor import KINK_TOLERANCE, Array, Function, Tensor

__all__ = [
    "abs",
    "add",
    "as_tensor",
    "bilinear_sample",
    "channel_softmax",
    "concatenate",
    "conv2d",
    "hinge",
    "log",
    "matmul",
    "mean",
    "mul",
    "relu",
    "reshape",
    "select",
    "stack",
    "sub",
    "sum",
    "tanh",
    "transpose",
]

TensorLike = Tensor | ArrayLike


def as_tensor(value: TensorLike, like: Tensor | None = None) -> Tensor:
    """Wrap a constant as a tensor with no gradient path.

    Parameters
    ----------
    value
        Tensor (returned unchanged) or array-like constant.
    like
        If given, the constant takes this tensor's dtype.

    Returns
    -------
    Tensor
        The wrapped value.
    """
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(value, dtype=dtype)


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum a broadcast gradient back down to an input shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, size in enumerate(shape) if size == 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _sign_signature(x: Array) -> bytes:
    sign = np.where(np.abs(x) <= KINK_TOLERANCE, 0, np.sign(x))
    return sign.astype(np.int8).tobytes()


class _Add(Function):
    def forward(self, *arrays: Array) -> Array:
        a, b = arrays
        self._shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad: Array) -> Sequence[Array | None]:
        return (
            _unbroadcast(grad, self._shapes[0]),
            _unbroadcast(grad, self._shapes[1]),
        )


class _Sub(Function):
    def forward(self, *arrays: Array) -> Array:
        a, b = arrays
        self._shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad: Array) -> Sequence[Array | None]:
        return (
            _unbroadcast(grad, self._shapes[0]),
            _unbroadcast(-grad, self._shapes[1]),
        )


class _Mul(Function):
    def forward(self, *arrays: Array) -> Array:
        self._a, self._b = arrays
        return self._a * self._b

    def backward(self, grad: Array) -> Sequence[Array | None]:
        return (
            _unbroadcast(grad * self._b, self._a.shape),
            _unbroadcast(grad * self._a, self._b.shape),
        )


class _MatMul(Function):
    def forward(self, *arrays: Array) -> Array:
        self._a, self._b = arrays
        return self._a @ self._b

    def backward(self, grad: Array) -> Sequence[Array | None]:
        return (grad @ self._b.T, self._a.T @ grad)


class _Conv2d(Function):
    def __init__(self, stride: int, padding: int) -> None:
        self._stride = stride
        self._padding = padding

    def forward(self, *arrays: Array) -> Array:
        x, weight, bias = arrays
        p, s = self._padding, self._stride
        padded = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        kh, kw = weight.shape[2:]
        windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))
        self._windows = windows[:, :, ::s, ::s]
        self._weight = weight
        self._input_shape = x.shape
        self._padded_shape = padded.shape
        out = np.einsum(
            "bchwij,ocij->bohw", self._windows, weight, optimize=True
        )
        return out + bias[None, :, None, None]

    def backward(self, grad: Array) -> Sequence[Array | None]:
        grad_weight = np.einsum(
            "bohw,bchwij->ocij", grad, self._windows, optimize=True
        )
        grad_bias = grad.sum(axis=(0, 2, 3))
        grad_input = None
        if self._needs_grad(0):
            p, s = self._padding, self._stride
            cols = np.einsum(
                "bohw,ocij->bchwij", grad, self._weight, optimize=True
            )
            padded = np.zeros(self._padded_shape, dtype=grad.dtype)
            out_h, out_w = grad.shape[2:]
            kh, kw = self._weight.shape[2:]
            for i in range(kh):
                for j in range(kw):
                    padded[
                        :, :, i : i + s * out_h : s, j : j + s * out_w : s
                    ] += cols[..., i, j]
            height, width = self._input_shape[2:]
            grad_input = padded[:, :, p : p + height, p : p + width]
        return (grad_input, grad_weight, grad_bias)


class _Relu(Function):
    def forward(self, *arrays: Array) -> Array:
        (x,) = arrays
        self._x = x
        self._mask = x > 0
        return np.where(self._mask, x, 0).astype(x.dtype)

    def backward(self, grad: Array) -> Sequence[Array | None]:
        return (grad * self._mask,)

    def kink_signature(self) -> bytes | None:
        return _sign_signature(self._x)


class _Tanh(Function):
    def forward(self, *arrays: Array) -> Array:
        (x,) = arrays
        self._out = np.tanh(x)
        return self._out

    def backward(self, grad: Array) -> Sequence[Array | None]:
        return (grad * (1 - self._out * self._out),)


class _Abs(Function):
    def forward(self, *arrays: Array) -> Array:
        (x,) = arrays
        self._x = x
        return np.abs(x)

    def backward(self, grad: Array) -> Sequence[Array | None]:
        return (grad * np.sign(self._x),)

    def kink_signature(self) -> bytes | None:
        return _sign_signature(self._x)


class _Log(Function):
    def forward(self, *arrays: Array) -> Array:
        (x,) = arrays
        self._x = x
        return np.log(x)

    def backward(self, grad: Array) -> Sequence[Array | None]:
        return (grad / self._x,)


class _Sum(Function):
    def __init__(self, axis: int | tuple[int, ...] | None, keepdims: bool):
        self._axis = axis
        self._keepdims = keepdims

    def forward(self, *arrays: Array) -> Array:
        (x,) = arrays
        self._shape = x.shape
        return np.asarray(x.sum(axis=self._axis, keepdims=self._keepdims))

    def backward(self, grad: Array) -> Sequence[Array | None]:
        return (self._expand(grad),)

    def _expand(self, grad: Array) -> Array:
        if self._axis is not None and not self._keepdims:
            grad = np.expand_dims(grad, self._axis)
        return np.broadcast_to(grad, self._shape).copy()


class _Mean(_Sum):
    def forward(self, *arrays: Array) -> Array:
        (x,) = arrays
        self._shape = x.shape
        reduced = x.mean(axis=self._axis, keepdims=True)
        self._count = x.size // reduced.size
        if self._keepdims:
            return reduced
        if self._axis is None:
            return reduced.reshape(())
        return np.squeeze(reduced, axis=self._axis)

    def backward(self, grad: Array) -> Sequence[Array | None]:
        return (self._expand(grad) / self._count,)


class _ChannelSoftmax(Function):
    def __init__(self, axis: int) -> None:
        self._axis = axis

    def forward(self, *arrays: Array) -> Array:
        (x,) = arrays
        shifted = x - x.max(axis=self._axis, keepdims=True)
        exp = np.exp(shifted)
        self._out = exp / exp.sum(axis=self._axis, keepdims=True)
        return self._out

    def backward(self, grad: Array) -> Sequence[Array | None]:
        s = self._out
        dot = (grad * s).sum(axis=self._axis, keepdims=True)
        return (s * (grad - dot),)


class _BilinearSample(Function):
    def forward(self, *arrays: Array) -> Array:
        fmap, points = arrays
        _, height, width = fmap.shape
        x, y = points[:, 0], points[:, 1]
        self._inside_x = (x >= 0) & (x <= width - 1)
        self._inside_y = (y >= 0) & (y <= height - 1)
        xc = np.clip(x, 0, width - 1)
        yc = np.clip(y, 0, height - 1)
        x0 = np.minimum(np.floor(xc), max(width - 2, 0)).astype(np.intp)
        y0 = np.minimum(np.floor(yc), max(height - 2, 0)).astype(np.intp)
        x1 = np.minimum(x0 + 1, width - 1)
        y1 = np.minimum(y0 + 1, height - 1)
        fx = (xc - x0)[:, None]
        fy = (yc - y0)[:, None]

        self._fmap_shape = fmap.shape
        self._index = (x0, y0, x1, y1)
        self._frac = (fx, fy)
        self._near = (
            np.abs(xc - np.round(xc)) <= KINK_TOLERANCE,
            np.abs(yc - np.round(yc)) <= KINK_TOLERANCE,
        )
        self._corners = (
            fmap[:, y0, x0].T,
            fmap[:, y0, x1].T,
            fmap[:, y1, x0].T,
            fmap[:, y1, x1].T,
        )
        f00, f01, f10, f11 = self._corners
        return (
            (1 - fx) * (1 - fy) * f00
            + fx * (1 - fy) * f01
            + (1 - fx) * fy * f10
            + fx * fy * f11
        )

    def backward(self, grad: Array) -> Sequence[Array | None]:
        x0, y0, x1, y1 = self._index
        fx, fy = self._frac
        f00, f01, f10, f11 = self._corners

        grad_fmap = None
        if self._needs_grad(0):
            grad_fmap = np.zeros(self._fmap_shape, dtype=grad.dtype)
            weights = (
                ((1 - fx) * (1 - fy), y0, x0),
                (fx * (1 - fy), y0, x1),
                ((1 - fx) * fy, y1, x0),
                (fx * fy, y1, x1),
            )
            for weight, rows, cols in weights:
                index = (slice(None), rows, cols)
                np.add.at(grad_fmap, index, (grad * weight).T)

        grad_points = None
        if self._needs_grad(1):
            _, height, width = self._fmap_shape
            dx = (1 - fy) * (f01 - f00) + fy * (f11 - f10)
            dy = (1 - fx) * (f10 - f00) + fx * (f11 - f01)
            gx = (grad * dx).sum(axis=1) * (self._inside_x & (width > 1))
            gy = (grad * dy).sum(axis=1) * (self._inside_y & (height > 1))
            grad_points = np.stack([gx, gy], axis=1).astype(grad.dtype)
        return (grad_fmap, grad_points)

    def kink_signature(self) -> bytes | None:
        x0, y0, _, _ = self._index
        parts = [x0, y0, self._inside_x, self._inside_y, *self._near]
        return np.stack(parts).astype(np.int64).tobytes()


class _Concatenate(Function):
    def __init__(self, axis: int) -> None:
        self._axis = axis

    def forward(self, *arrays: Array) -> Array:
        self._splits = np.cumsum([a.shape[self._axis] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=self._axis)

    def backward(self, grad: Array) -> Sequence[Array | None]:
        return np.split(grad, self._splits, axis=self._axis)


class _Reshape(Function):
    def __init__(self, shape: tuple[int, ...]) -> None:
        self._shape = shape

    def forward(self, *arrays: Array) -> Array:
        (x,) = arrays
        self._input_shape = x.shape
        return x.reshape(self._shape)

    def backward(self, grad: Array) -> Sequence[Array | None]:
        return (grad.reshape(self._input_shape),)


class _Transpose(Function):
    def forward(self, *arrays: Array) -> Array:
        (x,) = arrays
        return x.T

    def backward(self, grad: Array) -> Sequence[Array | None]:
        return (grad.T,)


class _Select(Function):
    def __init__(self, index: int) -> None:
        self._index = index

    def forward(self, *arrays: Array) -> Array:
        (x,) = arrays
        self._input_shape = x.shape
        self._dtype = x.dtype
        return x[self._index]

    def backward(self, grad: Array) -> Sequence[Array | None]:
        result = np.zeros(self._input_shape, dtype=self._dtype)
        result[self._index] = grad
        return (result,)


def add(a: TensorLike, b: TensorLike) -> Tensor:
    """Elementwise sum with broadcasting."""
    a = as_tensor(a)
    return _Add()(a, as_tensor(b, a))


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    """Elementwise difference with broadcasting."""
    a = as_tensor(a)
    return _Sub()(a, as_tensor(b, a))


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    """Elementwise product with broadcasting."""
    a = as_tensor(a)
    return _Mul()(a, as_tensor(b, a))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two 2D tensors.

    Raises
    ------
    InvalidArgumentError
        Raised if either tensor is not 2D or the inner dimensions differ.
    """
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        msg = f"Cannot multiply matrices of shape {a.shape} and {b.shape}"
        raise InvalidArgumentError(msg)
    return _MatMul()(a, b)


def conv2d(
    x: Tensor, weight: Tensor, bias: Tensor, *, stride: int = 1
) -> Tensor:
    """Zero-padded 2D cross-correlation.

    Parameters
    ----------
    x
        Input of shape ``B×C_in×H×W``.
    weight
        Kernels of shape ``C_out×C_in×3×3``.
    bias
        Bias of shape ``C_out``.
    stride
        Either 1 or 2.

    Returns
    -------
    Tensor
        Output of shape ``B×C_out×H'×W'`` with ``H' = ceil(H / stride)``.

    Raises
    ------
    InvalidArgumentError
        Raised if the shapes are inconsistent or the stride is unsupported.
    """
    if stride not in (1, 2):
        raise InvalidArgumentError(f"Unsupported stride {stride}")
    if x.ndim != 4 or weight.ndim != 4 or weight.shape[2:] != (3, 3):
        msg = f"Bad conv2d shapes: input {x.shape}, weight {weight.shape}"
        raise InvalidArgumentError(msg)
    if weight.shape[1] != x.shape[1] or bias.shape != (weight.shape[0],):
        msg = (
            f"Channel mismatch: input {x.shape}, weight {weight.shape},"
            f" bias {bias.shape}"
        )
        raise InvalidArgumentError(msg)
    return _Conv2d(stride, 1)(x, weight, bias)


def relu(x: Tensor) -> Tensor:
    """Rectified linear unit, ``max(x, 0)``."""
    return _Relu()(x)


def hinge(x: Tensor) -> Tensor:
    """Hinge ``[x]_+ = max(x, 0)`` used by the margin loss."""
    return _Relu()(x)


def tanh(x: Tensor) -> Tensor:
    """Hyperbolic tangent."""
    return _Tanh()(x)


def abs(x: Tensor) -> Tensor:  # noqa: A001
    """Elementwise absolute value. The gradient at zero is zero."""
    return _Abs()(x)


def log(x: Tensor) -> Tensor:
    """Natural logarithm of a positive tensor."""
    return _Log()(x)


def sum(  # noqa: A001
    x: Tensor,
    axis: int | tuple[int, ...] | None = None,
    *,
    keepdims: bool = False,
) -> Tensor:
    """Sum over the given axes, or over everything."""
    return _Sum(axis, keepdims)(x)


def mean(
    x: Tensor,
    axis: int | tuple[int, ...] | None = None,
    *,
    keepdims: bool = False,
) -> Tensor:
    """Arithmetic mean over the given axes, or over everything.

    Raises
    ------
    InvalidArgumentError
        Raised if the tensor is empty.
    """
    if x.size == 0:
        raise InvalidArgumentError("Cannot take the mean of an empty tensor")
    return _Mean(axis, keepdims)(x)


def channel_softmax(x: Tensor, axis: int = 1) -> Tensor:
    """Softmax along one axis, stabilized by subtracting the maximum.

    Parameters
    ----------
    x
        Input tensor.
    axis
        Channel axis.

    Raises
    ------
    InvalidArgumentError
        Raised if the tensor is empty.
    """
    if x.size == 0:
        raise InvalidArgumentError("Cannot softmax an empty tensor")
    return _ChannelSoftmax(axis)(x)


def bilinear_sample(fmap: Tensor, points: Tensor) -> Tensor:
    """Sample a feature map at continuous pixel coordinates.

    Points outside the map are clamped to its border before interpolation,
    and the clamped coordinate receives no gradient.

    Parameters
    ----------
    fmap
        Feature map of shape ``C×H×W``.
    points
        ``K×2`` tensor of ``(x, y)`` pixel coordinates, ``x`` along the width.

    Returns
    -------
    Tensor
        ``K×C`` interpolated features.

    Raises
    ------
    InvalidArgumentError
        Raised if the map is not 3D, has an empty spatial axis, or the points
        are not ``K×2``.
    """
    if fmap.ndim != 3 or fmap.shape[1] < 1 or fmap.shape[2] < 1:
        msg = f"Feature map must be C×H×W with H, W ≥ 1, not {fmap.shape}"
        raise InvalidArgumentError(msg)
    if points.ndim != 2 or points.shape[1] != 2:
        raise InvalidArgumentError(f"Points must be K×2, not {points.shape}")
    return _BilinearSample()(fmap, points)


def concatenate(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Join tensors along an existing axis."""
    if not tensors:
        raise InvalidArgumentError("Nothing to concatenate")
    return _Concatenate(axis)(*tensors)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    """Change the shape without changing the row-major values."""
    if int(np.prod(shape)) != x.size:
        msg = f"Cannot reshape {x.shape} to {shape}"
        raise InvalidArgumentError(msg)
    return _Reshape(shape)(x)


def transpose(x: Tensor) -> Tensor:
    """Transpose a 2D tensor."""
    if x.ndim != 2:
        raise InvalidArgumentError(f"transpose needs 2D input, not {x.shape}")
    return _Transpose()(x)


def select(x: Tensor, index: int) -> Tensor:
    """Take one slice along the leading axis."""
    return _Select(index)(x)


def stack(tensors: Sequence[Tensor]) -> Tensor:
    """Join equally shaped tensors along a new leading axis."""
    if not tensors:
        raise InvalidArgumentError("Nothing to stack")
    return concatenate([reshape(t, (1, *t.shape)) for t in tensors], axis=0)
