"""Tensors and the tape that records operations on them."""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from contextvars import ContextVar, Token
from types import TracebackType
from typing import TYPE_CHECKING, Any

import numpy as np
from numpy.typing import ArrayLike, DTypeLike, NDArray

from ..exceptions import InvalidArgumentError

if TYPE_CHECKING:
    from typing_extensions import Self

__all__ = [
    "KINK_TOLERANCE",
    "Array",
    "Function",
    "Tape",
    "Tensor",
    "backward",
    "current_tape",
    "no_grad",
]

Array = NDArray[np.floating[Any]]
"""Type of the buffers held by a `Tensor`."""

KINK_TOLERANCE = 1e-6
"""Distance from a non-differentiable point that counts as being on it."""

_current_tape: ContextVar[Tape | None] = ContextVar(
    "fewshotdag_tape", default=None
)


class Tensor:
    """Dense real array that may take part in reverse-mode differentiation.

    Parameters
    ----------
    data
        Values of the tensor. Integer input is converted to float64.
    requires_grad
        Whether gradients should be accumulated for this tensor when it is
        used on an active `Tape`.
    dtype
        If given, convert the data to this floating point type.
    """

    __slots__ = ("_tape", "data", "grad", "requires_grad")

    def __init__(
        self,
        data: ArrayLike,
        *,
        requires_grad: bool = False,
        dtype: DTypeLike | None = None,
    ) -> None:
        array = np.asarray(data, dtype=dtype)
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(np.float64)
        self.data: Array = array
        self.requires_grad = requires_grad
        self.grad: Array | None = None
        self._tape: Tape | None = None

    def __repr__(self) -> str:
        return (
            f"Tensor(shape={self.shape}, dtype={self.dtype},"
            f" requires_grad={self.requires_grad})"
        )

    @property
    def dtype(self) -> np.dtype[Any]:
        """Floating point type of the data."""
        return self.data.dtype

    @property
    def ndim(self) -> int:
        """Number of dimensions."""
        return self.data.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        """Dimension sizes."""
        return self.data.shape

    @property
    def size(self) -> int:
        """Total number of elements."""
        return self.data.size

    def detach(self) -> Tensor:
        """Return a tensor with the same values and no gradient path."""
        return Tensor(self.data, requires_grad=False)

    def item(self) -> float:
        """Return the value of a single-element tensor."""
        if self.size != 1:
            msg = f"item() needs a single-element tensor, not {self.shape}"
            raise InvalidArgumentError(msg)
        return float(self.data.reshape(()))

    def numpy(self) -> Array:
        """Return a copy of the values as a numpy array."""
        return self.data.copy()


class Function(ABC):
    """One primitive operation.

    Subclasses implement the forward computation on numpy arrays and its
    vector-Jacobian product. Calling an instance on tensors runs the forward
    pass and, if a `Tape` is active and any input requires gradients, records
    the instance on the tape.
    """

    inputs: tuple[Tensor, ...] = ()
    """Tensors the operation was applied to, set when recorded."""

    output: Tensor | None = None
    """Tensor produced by the operation, set when recorded."""

    def __call__(self, *inputs: Tensor) -> Tensor:
        data = self.forward(*(t.data for t in inputs))
        tape = _current_tape.get()
        tracked = tape is not None and any(t.requires_grad for t in inputs)
        output = Tensor(data, requires_grad=tracked)
        if tape is not None and tracked:
            self.inputs = inputs
            self.output = output
            tape.record(self)
        return output

    @abstractmethod
    def forward(self, *arrays: Array) -> Array:
        """Compute the operation.

        Parameters
        ----------
        *arrays
            Input buffers, in the order the tensors were passed.

        Returns
        -------
        numpy.ndarray
            Output buffer.
        """

    @abstractmethod
    def backward(self, grad: Array) -> Sequence[Array | None]:
        """Propagate the gradient of the output to the inputs.

        Parameters
        ----------
        grad
            Gradient of the loss with respect to the output.

        Returns
        -------
        list of numpy.ndarray or None
            Gradient with respect to each input, or `None` for inputs that do
            not need one.
        """

    def kink_signature(self) -> bytes | None:
        """Describe which side of each non-differentiable point was taken.

        Returns
        -------
        bytes or None
            `None` for smooth operations. Piecewise operations return a byte
            string that changes whenever an input crosses (or lands within
            `KINK_TOLERANCE` of) a point where the operation is not
            differentiable.
        """
        return None

    def _needs_grad(self, index: int) -> bool:
        return self.inputs[index].requires_grad


class Tape:
    """Ordered record of the operations executed while it is active.

    Use as a context manager. Operations run inside the ``with`` block on
    tensors that require gradients are appended in execution order, which is
    a topological order of the computation, so `backward` can replay them in
    reverse. Operations run outside any tape are not recorded and produce
    tensors with no gradient path.
    """

    def __init__(self) -> None:
        self._functions: list[Function] = []
        self._leaves: dict[int, Tensor] = {}
        self._tokens: list[Token[Tape | None]] = []

    def __enter__(self) -> Self:
        self._tokens.append(_current_tape.set(self))
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_val: BaseException | None,
        exc_tb: TracebackType | None,
    ) -> None:
        _current_tape.reset(self._tokens.pop())

    @property
    def functions(self) -> tuple[Function, ...]:
        """Recorded operations in execution order."""
        return tuple(self._functions)

    @property
    def leaves(self) -> list[Tensor]:
        """Gradient-tracked tensors used on the tape but not produced by it."""
        return list(self._leaves.values())

    def record(self, function: Function) -> None:
        """Append an executed operation.

        Parameters
        ----------
        function
            Operation whose ``inputs`` and ``output`` have been set.
        """
        for tensor in function.inputs:
            if tensor.requires_grad and tensor._tape is not self:
                self._leaves.setdefault(id(tensor), tensor)
        if function.output is not None:
            function.output._tape = self
        self._functions.append(function)

    def kink_signatures(self) -> list[bytes]:
        """Return the kink signature of every piecewise operation."""
        signatures = []
        for function in self._functions:
            signature = function.kink_signature()
            if signature is not None:
                signatures.append(signature)
        return signatures

    def backward(self, loss: Tensor) -> None:
        """Accumulate gradients of a scalar into every leaf of the tape.

        Every leaf gets a fresh gradient buffer, so leaves with no path to the
        loss end up with a zero gradient.

        Parameters
        ----------
        loss
            Single-element tensor produced on this tape.

        Raises
        ------
        InvalidArgumentError
            Raised if the loss has more than one element.
        """
        if loss.size != 1:
            msg = f"Loss must be a scalar, not shape {loss.shape}"
            raise InvalidArgumentError(msg)
        for leaf in self._leaves.values():
            leaf.grad = np.zeros_like(leaf.data)
        if loss._tape is not self:
            if id(loss) in self._leaves:
                loss.grad = np.ones_like(loss.data)
            return

        grads: dict[int, Array] = {id(loss): np.ones_like(loss.data)}
        for function in reversed(self._functions):
            if function.output is None:
                continue
            grad = grads.pop(id(function.output), None)
            if grad is None:
                continue
            input_grads = function.backward(grad)
            for tensor, input_grad in zip(
                function.inputs, input_grads, strict=True
            ):
                if input_grad is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                if key in self._leaves:
                    tensor.grad = tensor.grad + input_grad
                elif key in grads:
                    grads[key] = grads[key] + input_grad
                else:
                    grads[key] = input_grad


def backward(loss: Tensor) -> None:
    """Run reverse accumulation on the tape that produced a loss.

    Parameters
    ----------
    loss
        Single-element tensor computed on an active `Tape`.

    Raises
    ------
    InvalidArgumentError
        Raised if the loss is not a scalar or was not recorded on a tape.
    """
    if loss.size != 1:
        msg = f"Loss must be a scalar, not shape {loss.shape}"
        raise InvalidArgumentError(msg)
    if loss._tape is None:
        raise InvalidArgumentError("Loss was not recorded on a tape")
    loss._tape.backward(loss)


def current_tape() -> Tape | None:
    """Return the active tape, if any."""
    return _current_tape.get()


@contextmanager
def no_grad() -> Iterator[None]:
    """Suspend recording on the active tape.

    Tensors computed inside the block carry no gradient path, which is how
    teacher predictions are kept out of the student's backward pass.
    """
    token = _current_tape.set(None)
    try:
        yield
    finally:
        _current_tape.reset(token)
