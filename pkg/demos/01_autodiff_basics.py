"""Tensor core walkthrough: record a computation, differentiate it, and
check the gradient against finite differences.

Run from the repository root:  python3 demos/01_autodiff_basics.py
"""

import numpy as np

from freqseg import REAL, Tape, Tensor, bce, conv2d, grad_check, relu, sigmoid, sum_all

rng = np.random.default_rng(0)

print("== a small differentiable pipeline ==")
image = Tensor(rng.normal(size=(1, 6, 6)).astype(REAL))
kernel = Tensor(rng.normal(scale=0.5, size=(1, 1, 3, 3)).astype(REAL))
bias = Tensor(np.zeros(1, dtype=REAL))
target = Tensor(rng.uniform(size=(1, 6, 6)).astype(REAL))

with Tape() as tape:
    feature = relu(conv2d(image, kernel, bias, padding=1))
    mask = sigmoid(feature)
    loss = bce(mask, target)
grads = tape.backward(loss)

print(f"loss            : {loss.item():.6f}")
print(f"d loss / d kernel (2x2 corner):\n{grads.of(kernel)[0, 0, :2, :2]}")
print(f"d loss / d bias : {grads.of(bias)}")

print()
print("== the same gradients, verified by central finite differences ==")


def pipeline(img, ker, b):
    f = relu(conv2d(img, ker, b, padding=1))
    return bce(sigmoid(f), target)


report = grad_check(pipeline, [image, kernel, bias], step=1e-3, max_coords=8, seed=1)
for name, err in zip(("image", "kernel", "bias"), report.per_input):
    print(f"input {name}: max relative error {err:.2e}")
print(f"overall max relative error: {report.max_rel_err:.2e} "
      f"({'PASS' if report.passed else 'FAIL'} at 1e-2)")

print()
print("== gradients respect the graph, not the call order ==")
x = Tensor(np.array([2.0], dtype=REAL))
unused = Tensor(np.array([7.0], dtype=REAL))
with Tape() as tape:
    y = sum_all(relu(x))
grads = tape.backward(y)
print(f"d y / d x      = {grads.of(x)} (relu passes the slope through at x=2)")
print(f"d y / d unused = {grads.of(unused)} (never touched, so all zeros)")
