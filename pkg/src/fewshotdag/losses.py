"""Training objectives.

Landmark losses accept ``K×2`` tensors or batches of shape ``B×K×2``. Each
sample's L1 distance is averaged over its 2K coordinate components and the
result is averaged over the batch; the global hinge is applied per sample
before the batch average.
"""

from __future__ import annotations

from collections.abc import Sequence

from .config import LossConfig
from .dag.forward import DagOutput
from .diffcore import (
    Tensor,
    abs,
    add,
    as_tensor,
    channel_softmax,
    hinge,
    log,
    mean,
    mul,
    reshape,
    sub,
    sum,
)
from .exceptions import InvalidArgumentError
from .models.landmarks import LandmarkSet

__all__ = [
    "global_loss",
    "js_loss",
    "kl_divergence",
    "local_loss",
    "pseudo_gt_from_teacher",
    "supervised_total",
    "unlabeled_total",
]

LandmarkLike = Tensor | LandmarkSet


def _landmarks(value: LandmarkLike, like: Tensor | None = None) -> Tensor:
    if isinstance(value, LandmarkSet):
        return as_tensor(value.coords, like)
    return value


def _per_sample_l1(v: LandmarkLike, gt: LandmarkLike) -> Tensor:
    v = _landmarks(v)
    gt = _landmarks(gt, v)
    if v.shape != gt.shape or v.ndim not in (2, 3) or v.shape[-1] != 2:
        msg = f"Landmark shapes {v.shape} and {gt.shape} do not match"
        raise InvalidArgumentError(msg)
    components = 2 * v.shape[-2]
    rows = v.size // components
    distance = reshape(abs(sub(v, gt)), (rows, components))
    return mean(distance, axis=1)


def global_loss(
    v_global: LandmarkLike, v_gt: LandmarkLike, m: float
) -> Tensor:
    """Margin hinge on the mean L1 distance of the globally aligned shape.

    Returns ``max(mean |v_global − v_gt| − m, 0)``, averaged over the batch.

    Raises
    ------
    InvalidArgumentError
        Raised if the landmark shapes differ.
    """
    per_sample = _per_sample_l1(v_global, v_gt)
    return mean(hinge(sub(per_sample, m)))


def local_loss(v_local: LandmarkLike, v_gt: LandmarkLike) -> Tensor:
    """Mean L1 distance of the refined shape.

    Raises
    ------
    InvalidArgumentError
        Raised if the landmark shapes differ.
    """
    return mean(_per_sample_l1(v_local, v_gt))


def kl_divergence(p: Tensor, q: Tensor, epsilon: float = 1e-8) -> Tensor:
    """Kullback-Leibler divergence with a probability floor.

    Computes ``Σ p·(log(p + ε) − log(q + ε))`` over all elements, which is
    finite even where ``q`` is zero and exactly zero when ``p`` equals ``q``.

    Raises
    ------
    InvalidArgumentError
        Raised if the shapes differ.
    """
    p = as_tensor(p)
    q = as_tensor(q, p)
    if p.shape != q.shape:
        msg = f"Distributions of shape {p.shape} and {q.shape} differ"
        raise InvalidArgumentError(msg)
    ratio = sub(log(add(p, epsilon)), log(add(q, epsilon)))
    return sum(mul(p, ratio))


def js_loss(
    a_student: Tensor, a_teacher: Tensor, epsilon: float = 1e-8
) -> Tensor:
    """Jensen-Shannon consistency between two activation maps.

    Both maps are softmaxed over channels at every site. With ``m`` the mean
    of the two distributions, the loss is
    ``(KL(p_S‖m) + KL(p_T‖m)) / (2·|Ω|)`` where ``|Ω|`` counts every
    batch, channel and spatial element.

    Parameters
    ----------
    a_student
        Student activations, ``B×C×H'×W'`` (or ``C×H'×W'``).
    a_teacher
        Teacher activations of the same shape. No gradient flows into them.
    epsilon
        Probability floor of the KL terms.

    Raises
    ------
    InvalidArgumentError
        Raised if the shapes differ.
    """
    if a_student.shape != a_teacher.shape or a_student.ndim not in (3, 4):
        msg = (
            f"Activation maps of shape {a_student.shape} and"
            f" {a_teacher.shape} do not match"
        )
        raise InvalidArgumentError(msg)
    axis = a_student.ndim - 3
    p_student = channel_softmax(a_student, axis=axis)
    p_teacher = channel_softmax(a_teacher.detach(), axis=axis)
    middle = mul(add(p_student, p_teacher), 0.5)
    divergence = add(
        kl_divergence(p_student, middle, epsilon),
        kl_divergence(p_teacher, middle, epsilon),
    )
    return mul(divergence, 1.0 / (2 * a_student.size))


def supervised_total(
    v_global: LandmarkLike,
    v_local: LandmarkLike,
    v_gt: LandmarkLike,
    config: LossConfig,
    *,
    intermediate: Sequence[Tensor] = (),
) -> Tensor:
    """Weighted sum of the global and local losses.

    Parameters
    ----------
    v_global
        Globally aligned shape.
    v_local
        Final refined shape.
    v_gt
        Ground truth.
    config
        Loss weights.
    intermediate
        Earlier cascade outputs, also supervised if
        ``config.supervise_all_steps`` is set.
    """
    total = add(
        global_loss(v_global, v_gt, config.m),
        mul(local_loss(v_local, v_gt), config.w1),
    )
    if config.supervise_all_steps:
        for vertices in intermediate:
            total = add(total, mul(local_loss(vertices, v_gt), config.w1))
    return total


def pseudo_gt_from_teacher(teacher: DagOutput) -> Tensor:
    """Return the teacher's final landmarks with no gradient path."""
    return teacher.v_local.detach()


def unlabeled_total(
    student: DagOutput, teacher: DagOutput, config: LossConfig
) -> Tensor:
    """Consistency objective on an unlabeled batch.

    The teacher's final landmarks replace the ground truth in the global and
    local losses, and the JS loss compares the two feature maps. Nothing
    computed from the teacher receives a gradient.
    """
    pseudo_gt = pseudo_gt_from_teacher(teacher)
    total = add(
        global_loss(student.v_global, pseudo_gt, config.m),
        mul(local_loss(student.v_local, pseudo_gt), config.w1),
    )
    if config.w2 > 0:
        js = js_loss(student.fmap, teacher.fmap, config.kl_epsilon)
        total = add(total, mul(js, config.w2))
    return total
