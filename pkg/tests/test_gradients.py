"""Reverse-mode gradients against central finite differences, plus the
bookkeeping contracts of the tape itself.

The heavy 20-seed sweep lives in test_acceptance.py; here each op gets a
smaller seeded sample plus hand cases whose gradients are known exactly.
"""

import numpy as np
import pytest

from freqseg import (
    REAL,
    Tape,
    Tensor,
    bce,
    conv2d,
    ew_add,
    ew_mul,
    grad_check,
    is_recording,
    relu,
    sigmoid,
    sum_all,
)
from freqseg.verify import OP_CASES, check_op, end_to_end_check


def test_sum_gradient_is_all_ones():
    x = Tensor(np.arange(6.0).reshape(2, 3))
    with Tape() as tape:
        loss = sum_all(x)
    g = tape.backward(loss).of(x)
    assert np.array_equal(g, np.ones((2, 3), dtype=REAL))


def test_relu_conv_composition_passes_fd():
    rng = np.random.default_rng(0)
    x = Tensor(rng.uniform(0.1, 1.0, (1, 4, 4)).astype(REAL))
    w = Tensor(rng.uniform(0.1, 0.5, (1, 1, 3, 3)).astype(REAL))
    b = Tensor(np.full(1, 0.2, dtype=REAL))
    report = grad_check(lambda x, w, b: sum_all(relu(conv2d(x, w, b, padding=1))), [x, w, b])
    assert report.passed, report.per_input


def test_bce_sigmoid_composition_passes_fd():
    rng = np.random.default_rng(1)
    x = Tensor(rng.uniform(-1.5, 1.5, (1, 5, 5)).astype(REAL))
    t = Tensor(rng.uniform(0.1, 0.9, (1, 5, 5)).astype(REAL))
    report = grad_check(lambda x: bce(sigmoid(x), t), [x])
    assert report.passed, report.per_input


@pytest.mark.parametrize("name", sorted(OP_CASES))
def test_op_gradient_sweep(name):
    for seed in range(5):
        report = check_op(name, seed)
        assert report.passed, f"{name} seed {seed}: {report.per_input}"


def test_end_to_end_loss_gradients():
    report = end_to_end_check(0, coords_per_tensor=1)
    assert report.passed, max(report.per_input)


# ---------------------------------------------------------------------------
# tape contracts


def test_unused_input_gets_exact_zero_gradient():
    x = Tensor(np.ones((2, 2)))
    unused = Tensor(np.ones((2, 2)))
    with Tape() as tape:
        loss = sum_all(ew_mul(x, x))
    g = tape.backward(loss).of(unused)
    assert np.array_equal(g, np.zeros((2, 2), dtype=REAL))


def test_fan_out_gradients_accumulate():
    x = Tensor(np.array([3.0]))
    with Tape() as tape:
        loss = sum_all(ew_add(x, x))
    g = tape.backward(loss).of(x)
    assert np.array_equal(g, np.array([2.0], dtype=REAL))
    with Tape() as tape:
        loss = sum_all(ew_mul(x, x))
    g = tape.backward(loss).of(x)
    assert np.array_equal(g, np.array([6.0], dtype=REAL))


def test_tape_nesting_rejected():
    with Tape():
        with pytest.raises(RuntimeError):
            with Tape():
                pass
    assert not is_recording()


def test_backward_requires_scalar_loss():
    x = Tensor(np.ones((2, 2)))
    with Tape() as tape:
        y = ew_add(x, x)
    with pytest.raises(ValueError):
        tape.backward(y)


def test_is_recording_tracks_context():
    assert not is_recording()
    with Tape():
        assert is_recording()
    assert not is_recording()


def test_bce_target_side_gets_no_gradient():
    pred = Tensor(np.full((2, 2), 0.6, dtype=REAL))
    target = Tensor(np.full((2, 2), 0.3, dtype=REAL))
    with Tape() as tape:
        loss = bce(pred, target)
    grads = tape.backward(loss)
    assert np.array_equal(grads.of(target), np.zeros((2, 2), dtype=REAL))
    assert np.abs(grads.of(pred)).max() > 0


def test_gradients_outside_tape_are_not_recorded():
    x = Tensor(np.ones((2, 2)))
    y = ew_mul(x, x)  # no tape active
    with Tape() as tape:
        loss = sum_all(y)
    g = tape.backward(loss).of(x)
    assert np.array_equal(g, np.zeros((2, 2), dtype=REAL))
