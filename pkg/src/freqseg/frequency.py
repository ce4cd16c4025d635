"""Cross-scale frequency features (the cfm branch).

A small three-stage backbone yields taps at 1/2, 1/4 and 1/8 resolution.
Each tap is split into a high/low frequency pair (low = pooled second
channel half), run through an octave convolution that exchanges
information between the branches, and realigned onto a fixed pyramid
(50/25/12) by bilinear resize plus elementwise add. A neighbor-connection
decoder multiplies adjacent pyramid levels together and fuses the stack
into the canonical 50x50 feature grid.

Octave weight blocks are square (each path keeps its branch width), so a
per-tap 1x1 projection after realignment brings all taps to the shared
decoder width before the decoder runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (
    REAL,
    Tensor,
    avg_pool2,
    bilinear_resize,
    concat_channels,
    conv2d,
    ew_add,
    ew_mul,
    relu,
    rms_normalize,
    slice_channels,
)

# realign targets for the low/mid/high taps; the first is the canonical
# output grid, the rest keep the decoder pyramid strictly ordered for any
# valid input size
PYRAMID = ((50, 50), (25, 25), (12, 12))
CANONICAL_HW = 50


@dataclass
class FrequencyPair:
    """High branch at full tap resolution, low branch at half."""

    high: Tensor
    low: Tensor


@dataclass
class OctaveWeights:
    """Four conv paths between frequency branches plus one bias per output
    branch. w_hh: high->high, w_lh: low->high, w_ll: low->low, w_hl:
    high->low. Cross paths carry no bias so zeroing them reduces each
    branch to a plain convolution."""

    w_hh: Tensor
    w_lh: Tensor
    w_ll: Tensor
    w_hl: Tensor
    b_h: Tensor
    b_l: Tensor


def octave_split(x: Tensor) -> FrequencyPair:
    """Split C x H x W into a (C/2, H, W) high and (C/2, H/2, W/2) low pair."""
    c = x.data.shape[0]
    if c % 2:
        raise ValueError(f"octave_split needs an even channel count, got {c}")
    high = slice_channels(x, 0, c // 2)
    low = avg_pool2(slice_channels(x, c // 2, c))
    return FrequencyPair(high, low)


def octave_conv(pair: FrequencyPair, w: OctaveWeights) -> FrequencyPair:
    """Exchange information between branches at their native resolutions.

    high' = conv(high) + upsample(conv(low))
    low'  = conv(low) + conv(pool(high))
    """
    h, wd = pair.high.data.shape[1:]
    pad = w.w_hh.data.shape[2] // 2
    zero_h = Tensor(np.zeros(w.w_lh.data.shape[0], dtype=REAL))
    zero_l = Tensor(np.zeros(w.w_hl.data.shape[0], dtype=REAL))

    hh = conv2d(pair.high, w.w_hh, w.b_h, padding=pad)
    lh = bilinear_resize(conv2d(pair.low, w.w_lh, zero_h, padding=pad), h, wd)
    ll = conv2d(pair.low, w.w_ll, w.b_l, padding=pad)
    hl = conv2d(avg_pool2(pair.high), w.w_hl, zero_l, padding=pad)
    return FrequencyPair(ew_add(hh, lh), ew_add(ll, hl))


def realign_pair(pair: FrequencyPair, out_h: int, out_w: int) -> Tensor:
    """Resize both branches to a unified grid and add them."""
    return ew_add(bilinear_resize(pair.high, out_h, out_w),
                  bilinear_resize(pair.low, out_h, out_w))


def neighbor_decoder(x1: Tensor, x2: Tensor, x3: Tensor, fuse_w: Tensor, fuse_b: Tensor) -> Tensor:
    """Multiply neighboring pyramid levels and fuse the stack.

    Inputs are ordered low-level to high-level with non-increasing spatial
    size and a shared channel count C. Every operand is brought to the
    size of its combination partner by bilinear resize (a same-size resize
    is exact), intermediate products cascade, and the 3C-channel stack is
    fused by one 3x3 conv.
    """
    c = x1.data.shape[0]
    if x2.data.shape[0] != c or x3.data.shape[0] != c:
        raise ValueError("neighbor_decoder inputs must share a channel count")
    (h1, w1), (h2, w2), (h3, w3) = (t.data.shape[1:] for t in (x1, x2, x3))
    if not (h1 >= h2 >= h3 and w1 >= w2 >= w3):
        raise ValueError("neighbor_decoder needs non-increasing spatial sizes")

    def up(t: Tensor, ref: Tensor) -> Tensor:
        return bilinear_resize(t, ref.data.shape[1], ref.data.shape[2])

    f11 = ew_mul(x1, up(x2, x1))
    f12 = ew_mul(x2, up(x3, x2))
    f21 = ew_mul(up(f11, x1), up(f12, x1))
    f22 = concat_channels([f12, up(x3, x2)])
    f3 = concat_channels([up(f21, x1), up(f22, x1)])
    return conv2d(f3, fuse_w, fuse_b, padding=fuse_w.data.shape[2] // 2)


@dataclass
class FrequencyParams:
    """Everything the frequency branch owns, in checkpoint order."""

    backbone: list[tuple[Tensor, Tensor]]          # (weight, bias) per stage
    octave: list[OctaveWeights]                    # one per tap
    tap_proj: list[tuple[Tensor, Tensor]]          # 1x1 projections to decoder width
    fuse_w: Tensor
    fuse_b: Tensor
    plain_fuse_w: Tensor                           # control path (toggle off)
    plain_fuse_b: Tensor


def _he(rng: np.random.Generator, shape: tuple[int, ...]) -> Tensor:
    fan_in = int(np.prod(shape[1:], dtype=np.int64))
    return Tensor(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape).astype(REAL))


def init_tap_stages(rng: np.random.Generator, in_channels: int,
                    channels: tuple[int, ...]) -> list[tuple[Tensor, Tensor]]:
    """He-initialized conv/relu/pool stage parameters for toy_backbone."""
    stages = []
    c_prev = in_channels
    for c in channels:
        stages.append((_he(rng, (c, c_prev, 3, 3)), Tensor(np.zeros(c, dtype=REAL))))
        c_prev = c
    return stages


def init_frequency_params(rng: np.random.Generator, in_channels: int = 3,
                          tap_channels: tuple[int, int, int] = (8, 12, 16),
                          decoder_channels: int = 8, fused_channels: int = 16) -> FrequencyParams:
    backbone = init_tap_stages(rng, in_channels, tap_channels)
    octave = []
    for c in tap_channels:
        ch = c // 2
        octave.append(OctaveWeights(
            w_hh=_he(rng, (ch, ch, 3, 3)), w_lh=_he(rng, (ch, ch, 3, 3)),
            w_ll=_he(rng, (ch, ch, 3, 3)), w_hl=_he(rng, (ch, ch, 3, 3)),
            b_h=Tensor(np.zeros(ch, dtype=REAL)), b_l=Tensor(np.zeros(ch, dtype=REAL))))
    tap_proj = [( _he(rng, (decoder_channels, c // 2, 1, 1)),
                  Tensor(np.zeros(decoder_channels, dtype=REAL))) for c in tap_channels]
    fuse_w = _he(rng, (fused_channels, 3 * decoder_channels, 3, 3))
    fuse_b = Tensor(np.zeros(fused_channels, dtype=REAL))
    plain_fuse_w = _he(rng, (fused_channels, tap_channels[-1], 3, 3))
    plain_fuse_b = Tensor(np.zeros(fused_channels, dtype=REAL))
    return FrequencyParams(backbone, octave, tap_proj, fuse_w, fuse_b,
                           plain_fuse_w, plain_fuse_b)


def toy_backbone(image: Tensor, stages: list[tuple[Tensor, Tensor]]) -> list[Tensor]:
    """Conv/relu/pool stages; returns taps at 1/2, 1/4, ... resolution."""
    if image.data.ndim != 3:
        raise ValueError("toy_backbone expects a C x H x W image")
    h, w = image.data.shape[1:]
    step = 2 ** len(stages)
    if h % step or w % step:
        raise ValueError(f"toy_backbone needs spatial dims divisible by {step}, got {h}x{w}")
    taps = []
    x = image
    for wt, bt in stages:
        x = avg_pool2(relu(conv2d(x, wt, bt, padding=1)))
        taps.append(x)
    return taps


def frequency_features(image: Tensor, params: FrequencyParams) -> Tensor:
    """Full branch: backbone -> per-tap octave processing -> realign -> decode.

    Each decoder input and the decoder output are normalized to unit RMS.
    Nothing else in the branch bounds feature scale, and the decoder's
    elementwise products square whatever per-draw gain the random init
    landed on; without the normalization, head logits collapse or saturate
    on a large fraction of seeds.
    """
    taps = toy_backbone(image, params.backbone)
    levels = []
    for tap, octw, (pw, pb), (oh, ow) in zip(taps, params.octave, params.tap_proj, PYRAMID):
        pair = octave_conv(octave_split(tap), octw)
        levels.append(rms_normalize(conv2d(realign_pair(pair, oh, ow), pw, pb)))
    return rms_normalize(
        neighbor_decoder(levels[0], levels[1], levels[2], params.fuse_w, params.fuse_b))


def plain_features(image: Tensor, params: FrequencyParams) -> Tensor:
    """Control path with the frequency machinery removed: the backbone's
    last tap alone, resized to the canonical grid and fused by one 3x3
    conv. Single final-layer features are the conventional segmentation
    baseline; cross-granularity access is part of what the frequency
    branch adds, so the control must not get it for free. Output
    conditioning (unit RMS) matches the full branch so both paths hand
    the head features on the same footing."""
    tap = toy_backbone(image, params.backbone)[-1]
    x = bilinear_resize(tap, CANONICAL_HW, CANONICAL_HW)
    return rms_normalize(
        conv2d(x, params.plain_fuse_w, params.plain_fuse_b, padding=1))
