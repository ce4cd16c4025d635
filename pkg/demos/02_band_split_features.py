"""Frequency branch walkthrough: split features into frequency bands, run
a band-exchanging convolution, realign both bands, and fuse a three-level
pyramid with the neighbor decoder.

Run from the repository root:  python3 demos/02_band_split_features.py
"""

import numpy as np

from freqseg import (
    CANONICAL_HW,
    PYRAMID,
    REAL,
    OctaveWeights,
    Tensor,
    conv2d,
    frequency_features,
    octave_conv,
    octave_split,
    realign_pair,
)
from freqseg.frequency import init_frequency_params

rng = np.random.default_rng(0)

print("== splitting a feature map into high and low bands ==")
features = Tensor(rng.normal(size=(8, 16, 16)).astype(REAL))
pair = octave_split(features)
print(f"input    : {features.shape}")
print(f"high band: {pair.high.shape} (first half of the channels, full res)")
print(f"low band : {pair.low.shape} (second half, pooled to half res)")

print()
print("== band-exchanging convolution ==")


def he(*shape):
    fan_in = int(np.prod(shape[1:]))
    return Tensor(rng.normal(0, np.sqrt(2 / fan_in), shape).astype(REAL))


weights = OctaveWeights(w_hh=he(4, 4, 3, 3), w_lh=he(4, 4, 3, 3),
                        w_ll=he(4, 4, 3, 3), w_hl=he(4, 4, 3, 3),
                        b_h=Tensor(np.zeros(4, dtype=REAL)),
                        b_l=Tensor(np.zeros(4, dtype=REAL)))
out = octave_conv(pair, weights)
print(f"output high: {out.high.shape}, output low: {out.low.shape}")
print("each band receives its own conv plus a resampled conv of the other band")

print()
print("== zeroing the cross paths collapses it to two plain convs ==")
zero = Tensor(np.zeros((4, 4, 3, 3), dtype=REAL))
no_cross = OctaveWeights(w_hh=weights.w_hh, w_lh=zero, w_ll=weights.w_ll,
                         w_hl=zero, b_h=weights.b_h, b_l=weights.b_l)
reduced = octave_conv(pair, no_cross)
plain_high = conv2d(pair.high, weights.w_hh, weights.b_h, padding=1)
plain_low = conv2d(pair.low, weights.w_ll, weights.b_l, padding=1)
print(f"max |reduced.high - plain conv|: {np.abs(reduced.high.data - plain_high.data).max():.2e}")
print(f"max |reduced.low  - plain conv|: {np.abs(reduced.low.data - plain_low.data).max():.2e}")

print()
print("== realignment brings both bands to one grid ==")
merged = realign_pair(out, *PYRAMID[1])
print(f"realigned to {PYRAMID[1]}: {merged.shape} (high is resized, low is upsampled, then added)")

print()
print("== the full branch: image in, fused pyramid features out ==")
params = init_frequency_params(np.random.default_rng(7))
image = Tensor(rng.uniform(size=(3, 64, 64)).astype(REAL))
fused = frequency_features(image, params)
print(f"image {image.shape} -> features {fused.shape} "
      f"(pyramid levels {PYRAMID}, canonical grid {CANONICAL_HW})")
rms = float(np.sqrt((fused.data.astype(np.float64) ** 2).mean()))
print(f"output RMS: {rms:.4f} (each level and the output are RMS normalized)")
