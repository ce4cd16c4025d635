"""Weak supervision walkthrough: render a synthetic scene, then derive the
training target for it from nothing but the image and its class vector.

The pseudo-mask comes from a class activation map: project the class
embedding onto the channels of a frozen encoder, rectify, and divide by
the peak. No ground-truth mask is consulted anywhere in this file until
the final comparison printout.

Run from the repository root:  python3 demos/03_activation_masks.py
"""

import numpy as np

from freqseg import (
    CLASS_NAMES,
    Model,
    Tensor,
    bilinear_resize,
    gen_pseudo_embeddings,
    render_sample,
)
from freqseg.text_adapter import ClassEmbeddingTable


def ascii_map(arr, threshold=0.5):
    chars = " .:-=+*#%@"
    idx = np.clip((arr * (len(chars) - 1)).astype(int), 0, len(chars) - 1)
    return "\n".join("".join(chars[i] for i in row) for row in idx[::4, ::2])


rng = np.random.default_rng(3)
class_name = "ring"
image_u8, gt_mask = render_sample(class_name, rng)
print(f"rendered one {class_name!r} sample: image {image_u8.shape}, "
      f"foreground fraction {gt_mask.mean():.3f}")

table = ClassEmbeddingTable.from_vectors(
    CLASS_NAMES, gen_pseudo_embeddings(CLASS_NAMES, dim=1024, seed=0))
model = Model.init(0)

image = Tensor(np.transpose(image_u8, (2, 0, 1)).astype(np.float32) / 255.0)
pm = model.pseudo_mask(image, table.vector(CLASS_NAMES.index(class_name)))
print(f"pseudo-mask: shape {pm.shape}, range [{pm.data.min():.3f}, {pm.data.max():.3f}]")

print()
print("activation map (downsampled ascii, darker = stronger):")
print(ascii_map(pm.data[0]))

print()
print("ground truth for comparison (never used to build the map):")
print(ascii_map(gt_mask.astype(np.float64)))

up = bilinear_resize(pm, *gt_mask.shape)
inside = float(up.data[0][gt_mask.astype(bool)].mean())
print()
print("mean activation inside the object vs overall:",
      f"{inside:.3f} vs {float(up.data.mean()):.3f}")
print("(the map is a soft, weak target: bright on the object, not a perfect mask)")
