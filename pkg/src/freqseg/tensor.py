"""Reverse-mode autodiff over float32 numpy arrays.

Values are immutable ``Tensor`` objects; ops are plain functions that run
eagerly and, while a ``Tape`` is active, append a node with a backward
closure. There is no operator overloading and no broadcasting: every op
states its exact shape contract and rejects anything else. Gradients are
plain numpy arrays keyed by tensor identity.

The one sanctioned mutation point is parameter storage between tapes (the
optimizer updates ``Tensor.data`` in place; no tape may be alive across an
update). ``grad_check`` exploits the same loophole to wiggle inputs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

REAL = np.float32

_uid_counter = itertools.count()


class Tensor:
    """Immutable float32 array with an identity for gradient bookkeeping.

    Scalar reductions (sum_all, bce) also stash a float64 shadow of their
    value in ``exact``, and scalar arithmetic (scale, ew_add) propagates
    it. Training never reads the shadow; finite differences of a loss do,
    because differencing two float32-rounded scalars quantizes the result
    to the loss ulp over the probe span, which at small gradient scales is
    exactly the regime a gradient check must still resolve.
    """

    __slots__ = ("data", "uid", "exact")

    def __init__(self, data):
        arr = np.asarray(data, dtype=REAL)
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor rejects non-finite values")
        self.data = arr
        self.uid = next(_uid_counter)
        self.exact = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError("item() needs a single-element tensor")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, uid={self.uid})"


class _Node:
    __slots__ = ("out_uid", "in_uids", "backward")

    def __init__(self, out_uid, in_uids, backward):
        self.out_uid = out_uid
        self.in_uids = in_uids
        self.backward = backward


_active_tape: "Tape | None" = None


class Tape:
    """Recorded computation, in execution order.

    Use as a context manager; ops executed inside append nodes. backward()
    seeds the scalar loss with 1 and accumulates into a ``Grads`` map.
    Fan-out sums: a tensor consumed twice receives both contributions.
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        global _active_tape
        if _active_tape is not None:
            raise RuntimeError("a tape is already active; nesting is not supported")
        _active_tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _active_tape
        _active_tape = None
        return False

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], backward) -> None:
        self.nodes.append(_Node(out.uid, tuple(t.uid for t in inputs), backward))

    def backward(self, loss: Tensor) -> "Grads":
        if loss.data.size != 1:
            raise ValueError("backward needs a scalar loss")
        table: dict[int, np.ndarray] = {loss.uid: np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g_out = table.get(node.out_uid)
            if g_out is None:
                continue
            for uid, g_in in zip(node.in_uids, node.backward(g_out)):
                if g_in is None:
                    continue
                acc = table.get(uid)
                table[uid] = g_in if acc is None else acc + g_in
        return Grads(table)


class Grads:
    """Gradient lookup. Tensors off every path to the loss get exact zeros."""

    def __init__(self, table: dict[int, np.ndarray]):
        self._table = table

    def of(self, t: Tensor) -> np.ndarray:
        g = self._table.get(t.uid)
        if g is None:
            return np.zeros_like(t.data)
        return g


def _tape() -> Tape | None:
    return _active_tape


def is_recording() -> bool:
    return _active_tape is not None


# ---------------------------------------------------------------------------
# elementwise ops


# Active branch recorder for grad_check's kink handling. When set, the
# nonsmooth ops append which side of their kink every element landed on:
# relu records (sign bitmask, input values, output uid) so sign flips
# between two probe points can be located and their effect on the loss
# removed; clamp boundaries and argmax selections record an opaque
# fingerprint compared strictly. A finite difference whose probe points
# straddle a kink measures the average of two one-sided slopes, which no
# correct gradient should be expected to match.
_kink_trace: list | None = None


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, REAL(0)))
    if _kink_trace is not None:
        _kink_trace.append(
            (np.packbits((x.data > 0).reshape(-1)).tobytes(), x.data, out.uid))
    tape = _tape()
    if tape is not None:
        mask = x.data > 0  # subgradient 0 at the kink
        tape.record(out, (x,), lambda g: ((g * mask).astype(REAL),))
    return out


def sigmoid(x: Tensor) -> Tensor:
    z = x.data
    # split by sign so exp never overflows
    s = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                 np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z)))).astype(REAL)
    out = Tensor(s)
    tape = _tape()
    if tape is not None:
        tape.record(out, (x,), lambda g: ((g * s * (1 - s)).astype(REAL),))
    return out


def ew_add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"ew_add shape mismatch: {a.shape} vs {b.shape}")
    out = Tensor(a.data + b.data)
    if a.exact is not None and b.exact is not None:
        out.exact = a.exact + b.exact
    tape = _tape()
    if tape is not None:
        tape.record(out, (a, b), lambda g: (g, g))
    return out


def ew_mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"ew_mul shape mismatch: {a.shape} vs {b.shape}")
    out = Tensor(a.data * b.data)
    tape = _tape()
    if tape is not None:
        ad, bd = a.data, b.data
        tape.record(out, (a, b), lambda g: ((g * bd).astype(REAL), (g * ad).astype(REAL)))
    return out


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a python scalar (the scalar is not differentiated)."""
    c32 = REAL(c)
    out = Tensor(x.data * c32)
    if x.exact is not None:
        out.exact = x.exact * float(c32)
    tape = _tape()
    if tape is not None:
        tape.record(out, (x,), lambda g: ((g * c32).astype(REAL),))
    return out


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(np.asarray(x.data.sum(), dtype=REAL))
    out.exact = float(x.data.sum(dtype=np.float64))
    tape = _tape()
    if tape is not None:
        shp = x.data.shape
        tape.record(out, (x,), lambda g: (np.full(shp, g.reshape(()), dtype=REAL),))
    return out


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    if int(np.prod(shape, dtype=np.int64)) != x.size:
        raise ValueError(f"reshape {x.shape} -> {shape} changes element count")
    out = Tensor(x.data.reshape(shape))
    tape = _tape()
    if tape is not None:
        old = x.data.shape
        tape.record(out, (x,), lambda g: (g.reshape(old),))
    return out


def max_normalize(x: Tensor, eps: float = 1e-8) -> Tensor:
    """x / max(eps, max(x)).

    The eps guard keeps all-nonpositive inputs finite (they map to x/eps,
    which is all zeros after a relu). Gradient routes the max term through
    the first argmax when the guard is inactive.
    """
    m = float(x.data.max())
    denom = REAL(max(eps, m))
    out = Tensor(x.data / denom)
    if _kink_trace is not None:
        _kink_trace.append(np.int64(np.argmax(x.data)).tobytes() + bytes([m > eps]))
    tape = _tape()
    if tape is not None:
        if m > eps:
            amax = np.unravel_index(int(np.argmax(x.data)), x.data.shape)
            xd = x.data

            def bwd(g):
                gx = (g / denom).astype(REAL)
                gx[amax] -= REAL((g * xd).sum() / (denom * denom))
                return (gx,)

            tape.record(out, (x,), bwd)
        else:
            tape.record(out, (x,), lambda g: ((g / denom).astype(REAL),))
    return out


def rms_normalize(x: Tensor, eps: float = 1e-6) -> Tensor:
    """x / sqrt(mean(x^2) + eps).

    Output has root-mean-square 1 whenever the input is well above the eps
    floor, and the map is smooth everywhere (the floor keeps the gradient
    finite at zero input). Invariant to positive rescaling of the input up
    to the floor. Unlike max_normalize this has no kink, so it is the right
    tool for conditioning features rather than activation maps.
    """
    m = float((x.data.astype(np.float64) ** 2).mean())
    r = REAL(1.0 / np.sqrt(m + eps))
    out = Tensor(x.data * r)
    tape = _tape()
    if tape is not None:
        xd = x.data
        n = x.data.size

        def bwd(g):
            dot = float((g.astype(np.float64) * xd).sum())
            return ((g * r - xd * REAL(dot * float(r) ** 3 / n)).astype(REAL),)

        tape.record(out, (x,), bwd)
    return out


# ---------------------------------------------------------------------------
# channel ops (feature maps are C x H x W)


def concat_channels(parts: Sequence[Tensor]) -> Tensor:
    if len(parts) == 0:
        raise ValueError("concat_channels needs at least one input")
    for p in parts:
        if p.data.ndim != 3:
            raise ValueError("concat_channels expects C x H x W inputs")
        if p.data.shape[1:] != parts[0].data.shape[1:]:
            raise ValueError("concat_channels spatial dims differ")
    out = Tensor(np.concatenate([p.data for p in parts], axis=0))
    tape = _tape()
    if tape is not None:
        splits = np.cumsum([p.data.shape[0] for p in parts])[:-1]

        def bwd(g):
            return tuple(np.ascontiguousarray(s) for s in np.split(g, splits, axis=0))

        tape.record(out, tuple(parts), bwd)
    return out


def slice_channels(x: Tensor, start: int, stop: int) -> Tensor:
    if x.data.ndim != 3:
        raise ValueError("slice_channels expects a C x H x W input")
    if not (0 <= start < stop <= x.data.shape[0]):
        raise ValueError(f"slice_channels [{start}:{stop}] out of range for C={x.data.shape[0]}")
    out = Tensor(np.ascontiguousarray(x.data[start:stop]))
    tape = _tape()
    if tape is not None:
        shp = x.data.shape

        def bwd(g):
            gx = np.zeros(shp, dtype=REAL)
            gx[start:stop] = g
            return (gx,)

        tape.record(out, (x,), bwd)
    return out


def weighted_channel_sum(x: Tensor, w: Tensor) -> Tensor:
    """Collapse C x H x W to 1 x H x W with one scalar weight per channel."""
    if x.data.ndim != 3 or w.data.ndim != 1 or w.data.shape[0] != x.data.shape[0]:
        raise ValueError("weighted_channel_sum needs C x H x W and weights of length C")
    out = Tensor(np.tensordot(w.data, x.data, axes=([0], [0]))[None])
    tape = _tape()
    if tape is not None:
        xd, wd = x.data, w.data

        def bwd(g):
            g2 = g[0]
            gx = (wd[:, None, None] * g2[None]).astype(REAL)
            gw = np.tensordot(xd, g2, axes=([1, 2], [0, 1])).astype(REAL)
            return (gx, gw)

        tape.record(out, (x, w), bwd)
    return out


# ---------------------------------------------------------------------------
# spatial ops


def avg_pool2(x: Tensor) -> Tensor:
    """2x2 mean pool, stride 2. Odd spatial dims are rejected."""
    if x.data.ndim != 3:
        raise ValueError("avg_pool2 expects a C x H x W input")
    c, h, w = x.data.shape
    if h % 2 or w % 2:
        raise ValueError(f"avg_pool2 needs even spatial dims, got {h}x{w}")
    out = Tensor(x.data.reshape(c, h // 2, 2, w // 2, 2).mean(axis=(2, 4), dtype=REAL))
    tape = _tape()
    if tape is not None:
        def bwd(g):
            gq = (g * REAL(0.25))[:, :, None, :, None]
            return (np.broadcast_to(gq, (c, h // 2, 2, w // 2, 2)).reshape(c, h, w).astype(REAL),)

        tape.record(out, (x,), bwd)
    return out


def _resize_axis_coords(n_in: int, n_out: int):
    # align_corners=False source coord, edge clamped; exact identity when
    # n_in == n_out because (i + 0.5) * 1 - 0.5 == i in float64
    pos = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1.0)
    i0 = np.floor(pos).astype(np.int64)
    i0 = np.minimum(i0, n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    w1 = (pos - i0).astype(REAL)
    w0 = (REAL(1) - w1).astype(REAL)
    return i0, i1, w0, w1


def bilinear_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Channelwise bilinear resample to out_h x out_w (align corners false)."""
    if x.data.ndim != 3:
        raise ValueError("bilinear_resize expects a C x H x W input")
    if out_h < 1 or out_w < 1:
        raise ValueError("bilinear_resize target dims must be positive")
    c, h, w = x.data.shape
    i0, i1, r0, r1 = _resize_axis_coords(h, out_h)
    j0, j1, c0, c1 = _resize_axis_coords(w, out_w)
    rows = x.data[:, i0, :] * r0[None, :, None] + x.data[:, i1, :] * r1[None, :, None]
    out = Tensor(rows[:, :, j0] * c0[None, None, :] + rows[:, :, j1] * c1[None, None, :])
    tape = _tape()
    if tape is not None:
        def bwd(g):
            g_rows = np.zeros((c, out_h, w), dtype=REAL)
            np.add.at(g_rows, (slice(None), slice(None), j0), g * c0[None, None, :])
            np.add.at(g_rows, (slice(None), slice(None), j1), g * c1[None, None, :])
            gx = np.zeros((c, h, w), dtype=REAL)
            np.add.at(gx, (slice(None), i0, slice(None)), g_rows * r0[None, :, None])
            np.add.at(gx, (slice(None), i1, slice(None)), g_rows * r1[None, :, None])
            return (gx,)

        tape.record(out, (x,), bwd)
    return out


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """2D cross-correlation over C_in x H x W with C_out x C_in x k x k weights.

    Square odd kernels only; zero padding; bias has one entry per output
    channel. Output spatial dims follow (H + 2p - k) // stride + 1.
    """
    if x.data.ndim != 3 or w.data.ndim != 4 or b.data.ndim != 1:
        raise ValueError("conv2d expects x: CxHxW, w: OxCxkxk, b: O")
    c_out, c_in, kh, kw = w.data.shape
    if kh != kw:
        raise ValueError("conv2d kernels must be square")
    if kh % 2 == 0:
        raise ValueError("conv2d kernels must have odd size")
    if c_in != x.data.shape[0]:
        raise ValueError(f"conv2d channel mismatch: input {x.data.shape[0]}, weight {c_in}")
    if b.data.shape[0] != c_out:
        raise ValueError("conv2d bias length must equal output channels")
    if stride < 1 or padding < 0:
        raise ValueError("conv2d needs stride >= 1 and padding >= 0")
    _, h, wd = x.data.shape
    hp, wp = h + 2 * padding, wd + 2 * padding
    if kh > hp or kw > wp:
        raise ValueError("conv2d kernel larger than padded input")
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1

    if padding:
        xp = np.zeros((c_in, hp, wp), dtype=REAL)
        xp[:, padding:padding + h, padding:padding + wd] = x.data
    else:
        xp = x.data

    acc = np.zeros((c_out, oh, ow), dtype=REAL)
    for di in range(kh):
        for dj in range(kw):
            sl = xp[:, di:di + stride * oh:stride, dj:dj + stride * ow:stride]
            acc += np.tensordot(w.data[:, :, di, dj], sl, axes=([1], [0]))
    acc += b.data[:, None, None]
    out = Tensor(acc)

    tape = _tape()
    if tape is not None:
        wd_ = w.data

        def bwd(g):
            gxp = np.zeros((c_in, hp, wp), dtype=REAL)
            gw = np.zeros_like(wd_)
            for di in range(kh):
                for dj in range(kw):
                    sl = xp[:, di:di + stride * oh:stride, dj:dj + stride * ow:stride]
                    gw[:, :, di, dj] = np.tensordot(g, sl, axes=([1, 2], [1, 2]))
                    gxp[:, di:di + stride * oh:stride, dj:dj + stride * ow:stride] += \
                        np.tensordot(wd_[:, :, di, dj], g, axes=([0], [0]))
            gx = gxp[:, padding:padding + h, padding:padding + wd] if padding else gxp
            gb = g.sum(axis=(1, 2), dtype=REAL)
            return (np.ascontiguousarray(gx), gw, gb)

        tape.record(out, (x, w, b), bwd)
    return out


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """w @ x + b for a flat input vector."""
    if x.data.ndim != 1 or w.data.ndim != 2 or b.data.ndim != 1:
        raise ValueError("linear expects x: n, w: m x n, b: m")
    m, n = w.data.shape
    if x.data.shape[0] != n or b.data.shape[0] != m:
        raise ValueError(f"linear shape mismatch: x {x.data.shape}, w {w.data.shape}, b {b.data.shape}")
    out = Tensor(w.data @ x.data + b.data)
    tape = _tape()
    if tape is not None:
        xd, wd = x.data, w.data

        def bwd(g):
            return ((wd.T @ g).astype(REAL), np.outer(g, xd).astype(REAL), g.astype(REAL))

        tape.record(out, (x, w, b), bwd)
    return out


# ---------------------------------------------------------------------------
# loss


BCE_CLAMP = 1e-7


def bce(pred: Tensor, target: Tensor) -> Tensor:
    """Mean binary cross-entropy; predictions clamped to [1e-7, 1 - 1e-7].

    Targets may be soft (any values in [0, 1]) and are treated as constants:
    no gradient flows to the target side.
    """
    if pred.shape != target.shape:
        raise ValueError(f"bce shape mismatch: {pred.shape} vs {target.shape}")
    p = np.clip(pred.data, BCE_CLAMP, 1.0 - BCE_CLAMP).astype(REAL)
    t = target.data
    if _kink_trace is not None:
        clamped = (pred.data <= BCE_CLAMP) | (pred.data >= 1.0 - BCE_CLAMP)
        _kink_trace.append(np.packbits(clamped.reshape(-1)).tobytes())
    loss = -(t * np.log(p) + (1 - t) * np.log1p(-p))
    mean64 = loss.mean(dtype=np.float64)
    out = Tensor(np.asarray(mean64, dtype=REAL))
    out.exact = float(mean64)
    tape = _tape()
    if tape is not None:
        inside = (pred.data > BCE_CLAMP) & (pred.data < 1.0 - BCE_CLAMP)
        n = p.size

        def bwd(g):
            gp = g.reshape(()) * (p - t) / (p * (1 - p)) / REAL(n)
            return ((gp * inside).astype(REAL), None)

        tape.record(out, (pred, target), bwd)
    return out


# ---------------------------------------------------------------------------
# finite-difference verification


@dataclass
class GradCheckReport:
    """Per-input max error from central differences, scale-normalized.

    Errors are |analytic - numeric| divided by the largest gradient
    magnitude seen for that input (with a tiny floor), so near-zero
    coordinates do not blow up the ratio at float32 precision. Coordinates
    are an exhaustive sweep for small tensors and a seeded subsample above
    ``max_coords`` elements.
    """

    per_input: list[float] = field(default_factory=list)
    rel_tol: float = 1e-2

    @property
    def max_rel_err(self) -> float:
        return max(self.per_input) if self.per_input else 0.0

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.rel_tol


def _probe_eval(f: Callable[..., Tensor], inputs: Sequence[Tensor],
                traced: bool) -> tuple[float, list | None]:
    global _kink_trace
    if not traced:
        out = f(*inputs)
        return (out.exact if out.exact is not None else out.item()), None
    _kink_trace = []
    try:
        out = f(*inputs)
        return (out.exact if out.exact is not None else out.item()), _kink_trace
    finally:
        _kink_trace = None


def _branch_correction(base: list, probe: list, gmaps: list) -> tuple[float, float] | None:
    """Signed first-order adjustment removing relu branch flips from a probe.

    The recorded gradient differentiates the base-branch extension of the
    loss (relu masks frozen at the base point). Subtracting ``correction``
    from a probe's loss recovers that extension to first order: each unit
    that changed sign contributes downstream-grad x |input at the probe|.
    The second value is the same sum in absolute value, a measure of how
    nonsmooth the segment is. None means a strict branch (clamp region,
    argmax) flipped, where no cheap correction exists.
    """
    if len(base) != len(probe):
        return None
    corr = 0.0
    mass = 0.0
    for b, p, g in zip(base, probe, gmaps):
        if isinstance(b, bytes):
            if b != p:
                return None
            continue
        b_mask, b_vals, _ = b
        p_mask, p_vals, _ = p
        if b_mask == p_mask or g is None:
            continue
        flips = np.unpackbits(np.frombuffer(b_mask, np.uint8)
                              ^ np.frombuffer(p_mask, np.uint8))[:b_vals.size]
        idx = np.nonzero(flips)[0]
        # relu(a) minus the frozen-mask value is |a| at every flipped unit
        amp = np.abs(p_vals.reshape(-1)[idx])
        gi = g[idx]
        corr += float((gi * amp).sum())
        mass += float((np.abs(gi) * amp).sum())
    return corr, mass


def grad_check(f: Callable[..., Tensor], inputs: Sequence[Tensor], rel_tol: float = 1e-2,
               step: float = 1e-3, max_coords: int = 24, seed: int = 0,
               kink_aware: bool = False) -> GradCheckReport:
    """Compare tape gradients of a scalar function against central differences.

    ``f`` is re-run (without recording) twice per probed coordinate; inputs
    are restored afterwards. Step is applied in float32, and the realized
    step (which can differ from the nominal one by rounding) is used as the
    divisor.

    A central difference across a kink averages two one-sided slopes, which
    no correct gradient should be expected to match, and a composition deep
    enough crosses some relu somewhere for nearly every coordinate. With
    ``kink_aware`` set, probe losses are adjusted back onto the base-branch
    extension (see _branch_correction), which is the function the recorded
    gradient actually differentiates; the adjustment is first-order in the
    recorded relu-output gradients, so the quotient still independently
    verifies the whole chain outside the flipped units. Coordinates that
    flip a strict branch (clamp, argmax) or need an outsized adjustment are
    discarded and another coordinate is drawn in their place. Functions of
    a handful of ops should keep the flag off and sample away from kinks
    instead.
    """
    global _kink_trace
    base_trace: list | None = None
    if kink_aware:
        _kink_trace = []
    try:
        with Tape() as tape:
            loss = f(*inputs)
        base_trace = _kink_trace
    finally:
        _kink_trace = None
    if loss.data.size != 1:
        raise ValueError("grad_check needs a scalar-valued function")
    grads = tape.backward(loss)
    analytic = [grads.of(x) for x in inputs]

    gmaps: list | None = None
    if kink_aware:
        # signed downstream gradient of each relu output; None when off-path
        gmaps = [None if isinstance(e, bytes) else
                 (None if (g := grads._table.get(e[2])) is None else g.reshape(-1))
                 for e in base_trace]

    rng = np.random.default_rng(seed)
    report = GradCheckReport(rel_tol=rel_tol)
    for i, (x, ga) in enumerate(zip(inputs, analytic)):
        n = x.size
        want = min(n, max_coords)
        # kink handling needs spare candidates to fall back on
        cap = min(n, max_coords * 8) if kink_aware else want
        if cap == n:
            pool = rng.permutation(n) if kink_aware else np.arange(n)
        else:
            pool = rng.choice(n, size=cap, replace=False)
        worst = 0.0
        scale0 = float(np.abs(ga).max())
        scale_ref = scale0
        accepted = 0
        for flat_idx in pool:
            if accepted >= want:
                break
            idx = np.unravel_index(int(flat_idx), x.data.shape)
            orig = x.data[idx]
            x.data[idx] = orig + REAL(step)
            hi = float(x.data[idx])
            fp, trace_p = _probe_eval(f, inputs, kink_aware)
            x.data[idx] = orig - REAL(step)
            lo = float(x.data[idx])
            fm, trace_m = _probe_eval(f, inputs, kink_aware)
            x.data[idx] = orig
            if kink_aware:
                adj_p = _branch_correction(base_trace, trace_p, gmaps)
                adj_m = _branch_correction(base_trace, trace_m, gmaps)
                if adj_p is None or adj_m is None:
                    continue
                if adj_p[1] + adj_m[1] > 0.5 * max(scale0, 1e-8) * abs(hi - lo):
                    continue
                fp -= adj_p[0]
                fm -= adj_m[0]
            accepted += 1
            fd = (fp - fm) / (hi - lo)
            scale_ref = max(scale_ref, abs(fd))
            worst = max(worst, abs(float(ga[idx]) - fd))
        if n > 0 and accepted == 0:
            raise ValueError(
                f"input {i}: every candidate coordinate crosses a kink at step {step}")
        denom = max(scale_ref, 1e-8)
        report.per_input.append(worst / denom)
    return report
