"""Binary fixture formats: TEN0 tensors, CLIPEMB1 embedding tables,
PGM/PPM images, the checkpoint container, and the loss CSV.

Everything is little-endian and write -> read -> write is byte-identical
for files produced here. Readers validate magics and lengths and reject
trailing garbage rather than guessing.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .tensor import REAL, Tensor

TEN0_MAGIC = b"TEN0"
CLIPEMB_MAGIC = b"CLIPEMB1"
CHECKPOINT_MAGIC = b"CKPT"


# ---------------------------------------------------------------------------
# TEN0: magic, u32 ndim, ndim u32 dims, float32 payload, row-major


def ten0_bytes(t: Tensor) -> bytes:
    dims = t.data.shape
    head = TEN0_MAGIC + struct.pack("<I", len(dims)) + struct.pack(f"<{len(dims)}I", *dims)
    return head + np.ascontiguousarray(t.data, dtype=REAL).tobytes()


def tensor_from_ten0(buf: bytes) -> Tensor:
    if len(buf) < 8 or buf[:4] != TEN0_MAGIC:
        raise ValueError("not a TEN0 payload (bad magic)")
    (ndim,) = struct.unpack_from("<I", buf, 4)
    off = 8
    if len(buf) < off + 4 * ndim:
        raise ValueError("truncated TEN0 header")
    dims = struct.unpack_from(f"<{ndim}I", buf, off)
    off += 4 * ndim
    if any(d == 0 for d in dims):
        raise ValueError("TEN0 dims must be positive")
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    end = off + 4 * count
    if len(buf) < end:
        raise ValueError("truncated TEN0 payload")
    if len(buf) > end:
        raise ValueError("trailing bytes after TEN0 payload")
    data = np.frombuffer(buf, dtype="<f4", count=count, offset=off).reshape(dims)
    return Tensor(data.copy())


def write_ten0(path: str | Path, t: Tensor) -> None:
    Path(path).write_bytes(ten0_bytes(t))


def read_ten0(path: str | Path) -> Tensor:
    return tensor_from_ten0(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# PGM (P5) and PPM (P6), 8-bit only


def write_pgm(path: str | Path, img: np.ndarray) -> None:
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError("write_pgm expects a 2-D uint8 array")
    h, w = img.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + img.tobytes())


def write_ppm(path: str | Path, img: np.ndarray) -> None:
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError("write_ppm expects an H x W x 3 uint8 array")
    h, w, _ = img.shape
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + img.tobytes())


def _read_netpbm(buf: bytes, magic: bytes, channels: int) -> np.ndarray:
    if not buf.startswith(magic):
        raise ValueError(f"expected {magic.decode()} image")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":  # comment line
            pos = buf.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(buf[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise ValueError("only 8-bit netpbm images are supported")
    count = w * h * channels
    if len(buf) - pos != count:
        raise ValueError("netpbm payload length mismatch")
    arr = np.frombuffer(buf, dtype=np.uint8, count=count, offset=pos)
    return arr.reshape((h, w) if channels == 1 else (h, w, 3)).copy()


def read_pgm(path: str | Path) -> np.ndarray:
    return _read_netpbm(Path(path).read_bytes(), b"P5", 1)


def read_ppm(path: str | Path) -> np.ndarray:
    return _read_netpbm(Path(path).read_bytes(), b"P6", 3)


# ---------------------------------------------------------------------------
# CLIPEMB1: magic, u32 num_classes, u32 dim, float32 vectors, JSON trailer.
# This writer emits a bare JSON array of class names. The reader also
# accepts an object with a "class_names" key so exporters can attach
# metadata (model id, prompt templates) in the trailer.


def clipemb_bytes(class_names: list[str], vectors: np.ndarray) -> bytes:
    if vectors.ndim != 2 or vectors.shape[0] != len(class_names):
        raise ValueError("vectors must be num_classes x dim")
    if len(set(class_names)) != len(class_names):
        raise ValueError("duplicate class names")
    head = CLIPEMB_MAGIC + struct.pack("<II", vectors.shape[0], vectors.shape[1])
    trailer = json.dumps(class_names, separators=(",", ":")).encode("utf-8")
    return head + np.ascontiguousarray(vectors, dtype="<f4").tobytes() + trailer


def parse_clipemb(buf: bytes) -> tuple[list[str], np.ndarray]:
    if len(buf) < 16 or buf[:8] != CLIPEMB_MAGIC:
        raise ValueError("not a CLIPEMB1 payload (bad magic)")
    n, dim = struct.unpack_from("<II", buf, 8)
    off = 16
    end = off + 4 * n * dim
    if len(buf) < end:
        raise ValueError("truncated CLIPEMB1 vector block")
    vectors = np.frombuffer(buf, dtype="<f4", count=n * dim, offset=off).reshape(n, dim).copy()
    try:
        trailer = json.loads(buf[end:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ValueError(f"bad CLIPEMB1 trailer: {e}") from None
    if isinstance(trailer, dict):
        names = trailer.get("class_names")
    else:
        names = trailer
    if not isinstance(names, list) or len(names) != n or not all(isinstance(s, str) for s in names):
        raise ValueError("CLIPEMB1 trailer must list one name per class")
    return list(names), vectors


def write_clipemb(path: str | Path, class_names: list[str], vectors: np.ndarray) -> None:
    Path(path).write_bytes(clipemb_bytes(class_names, vectors))


def read_clipemb(path: str | Path) -> tuple[list[str], np.ndarray]:
    return parse_clipemb(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# checkpoint container: magic, u32 record count, records of
# (u32 name_len, name, u32 blob_len, TEN0), then a JSON trailer to EOF


def checkpoint_bytes(named: list[tuple[str, Tensor]], trailer: dict) -> bytes:
    out = [CHECKPOINT_MAGIC, struct.pack("<I", len(named))]
    seen = set()
    for name, t in named:
        if name in seen:
            raise ValueError(f"duplicate checkpoint record {name!r}")
        seen.add(name)
        nb = name.encode("utf-8")
        blob = ten0_bytes(t)
        out.append(struct.pack("<I", len(nb)))
        out.append(nb)
        out.append(struct.pack("<I", len(blob)))
        out.append(blob)
    out.append(json.dumps(trailer, sort_keys=True, separators=(",", ":")).encode("utf-8"))
    return b"".join(out)


def parse_checkpoint(buf: bytes) -> tuple[list[tuple[str, Tensor]], dict]:
    if len(buf) < 8 or buf[:4] != CHECKPOINT_MAGIC:
        raise ValueError("not a checkpoint (bad magic)")
    (count,) = struct.unpack_from("<I", buf, 4)
    off = 8
    named = []
    for _ in range(count):
        if len(buf) < off + 4:
            raise ValueError("truncated checkpoint record header")
        (nlen,) = struct.unpack_from("<I", buf, off)
        off += 4
        if len(buf) < off + nlen + 4:
            raise ValueError("truncated checkpoint record name")
        name = buf[off:off + nlen].decode("utf-8")
        off += nlen
        (blen,) = struct.unpack_from("<I", buf, off)
        off += 4
        if len(buf) < off + blen:
            raise ValueError(f"truncated checkpoint record {name!r}")
        named.append((name, tensor_from_ten0(buf[off:off + blen])))
        off += blen
    try:
        trailer = json.loads(buf[off:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ValueError(f"bad checkpoint trailer: {e}") from None
    if not isinstance(trailer, dict):
        raise ValueError("checkpoint trailer must be a JSON object")
    return named, trailer


def write_checkpoint(path: str | Path, named: list[tuple[str, Tensor]], trailer: dict) -> None:
    Path(path).write_bytes(checkpoint_bytes(named, trailer))


def read_checkpoint(path: str | Path) -> tuple[list[tuple[str, Tensor]], dict]:
    return parse_checkpoint(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# loss curve CSV


def write_loss_csv(path: str | Path, curve: list[tuple[int, float]]) -> None:
    lines = ["step,loss"]
    for step, loss in curve:
        lines.append(f"{step},{np.float32(loss):.9g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_loss_csv(path: str | Path) -> list[tuple[int, float]]:
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not text or text[0] != "step,loss":
        raise ValueError("loss csv must start with a step,loss header")
    out = []
    for line in text[1:]:
        s, l = line.split(",")
        out.append((int(s), float(l)))
    return out
