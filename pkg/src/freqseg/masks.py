"""Pseudo-mask generation and the iterative segmentation head.

Pseudo-masks come from class activation maps: a channel-weighted sum of
feature maps (weights = projected class embedding), rectified and divided
by its max with an epsilon guard. They are soft targets in [0, 1] and are
never generated under an active tape; the trainer treats them as
constants.

The head is a deliberately small stand-in for the full interactive
refinement network: two 3x3 convs with shared weights across N
iterations, each iteration consuming the features plus the previous mask
and emitting a sigmoid mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (
    REAL,
    Tensor,
    bilinear_resize,
    concat_channels,
    conv2d,
    max_normalize,
    relu,
    sigmoid,
    weighted_channel_sum,
)

CAM_EPS = 1e-8


def cam(features: Tensor, class_embedding: Tensor) -> Tensor:
    """Activation map in [0, 1]: relu of the weighted channel sum, divided
    by max(eps, max). Output max is 1 unless nothing fires, in which case
    the whole map is 0. Invariant to positive scaling of the features."""
    return max_normalize(relu(weighted_channel_sum(features, class_embedding)), eps=CAM_EPS)


@dataclass
class HeadParams:
    """Two shared 3x3 conv layers applied at every refinement iteration."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor


def init_head_params(rng: np.random.Generator, in_channels: int, hidden: int = 16) -> HeadParams:
    def he(shape):
        fan_in = int(np.prod(shape[1:], dtype=np.int64))
        return Tensor(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape).astype(REAL))

    return HeadParams(
        w1=he((hidden, in_channels + 1, 3, 3)), b1=Tensor(np.zeros(hidden, dtype=REAL)),
        w2=he((1, hidden, 3, 3)), b2=Tensor(np.zeros(1, dtype=REAL)))


def seg_head(features: Tensor, init_mask: Tensor, params: HeadParams,
             iterations: int, out_h: int, out_w: int) -> list[Tensor]:
    """Refine init_mask over ``iterations`` rounds with shared weights.

    Returns one mask per iteration, each resized to out_h x out_w. Values
    are sigmoid outputs, strictly inside (0, 1) up to float32 resolution.
    """
    if iterations < 1:
        raise ValueError("seg_head needs at least one iteration")
    if init_mask.data.ndim != 3 or init_mask.data.shape[0] != 1:
        raise ValueError("init_mask must be 1 x H x W")
    if init_mask.data.shape[1:] != features.data.shape[1:]:
        raise ValueError("init_mask and features must share spatial dims")
    m = init_mask
    out = []
    for _ in range(iterations):
        h = concat_channels([features, m])
        a = relu(conv2d(h, params.w1, params.b1, padding=1))
        m = sigmoid(conv2d(a, params.w2, params.b2, padding=1))
        out.append(bilinear_resize(m, out_h, out_w))
    return out
