"""Synthetic segmentation corpus: 8 parametric shape classes on two
background textures (smooth gradient vs high-frequency checker), rendered
at 64x64 with analytically rasterized masks. Also the deterministic
pseudo-embedding generator used when no real text encoder is available.

Generation is deterministic per (seed, per_class): every image draws its
parameters from a stream seeded by (seed, class_id, index), so bytes are
identical across runs and independent of generation order.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from . import fileio

CLASS_NAMES = ["disk", "square", "triangle", "ring", "cross", "bar", "ellipse", "diamond"]
IMAGE_HW = 64


# ---------------------------------------------------------------------------
# analytic rasterizers (pixel centers at integer coordinates)


def _grid(hw: int):
    yy, xx = np.mgrid[0:hw, 0:hw].astype(np.float64)
    return xx, yy


def raster_disk(hw: int, cx: float, cy: float, r: float) -> np.ndarray:
    xx, yy = _grid(hw)
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r


def raster_square(hw: int, cx: float, cy: float, half: float) -> np.ndarray:
    xx, yy = _grid(hw)
    return np.maximum(np.abs(xx - cx), np.abs(yy - cy)) <= half


def raster_triangle(hw: int, cx: float, cy: float, base: float, height: float) -> np.ndarray:
    xx, yy = _grid(hw)
    t = (yy - (cy - height / 2)) / height
    return (t >= 0) & (t <= 1) & (np.abs(xx - cx) <= t * base / 2)


def raster_ring(hw: int, cx: float, cy: float, r_out: float, r_in: float) -> np.ndarray:
    xx, yy = _grid(hw)
    d2 = (xx - cx) ** 2 + (yy - cy) ** 2
    return (d2 <= r_out * r_out) & (d2 >= r_in * r_in)


def raster_cross(hw: int, cx: float, cy: float, arm: float, length: float) -> np.ndarray:
    xx, yy = _grid(hw)
    dx, dy = np.abs(xx - cx), np.abs(yy - cy)
    return ((dx <= arm) & (dy <= length)) | ((dy <= arm) & (dx <= length))


def _rotated(hw: int, cx: float, cy: float, angle: float):
    xx, yy = _grid(hw)
    dx, dy = xx - cx, yy - cy
    c, s = np.cos(angle), np.sin(angle)
    return c * dx + s * dy, -s * dx + c * dy


def raster_bar(hw: int, cx: float, cy: float, half_len: float, half_thick: float,
               angle: float) -> np.ndarray:
    u, v = _rotated(hw, cx, cy, angle)
    return (np.abs(u) <= half_len) & (np.abs(v) <= half_thick)


def raster_ellipse(hw: int, cx: float, cy: float, a: float, b: float, angle: float) -> np.ndarray:
    u, v = _rotated(hw, cx, cy, angle)
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def raster_diamond(hw: int, cx: float, cy: float, r: float) -> np.ndarray:
    xx, yy = _grid(hw)
    return np.abs(xx - cx) + np.abs(yy - cy) <= r


def shape_mask(class_name: str, rng: np.random.Generator, hw: int = IMAGE_HW) -> np.ndarray:
    """Draw shape parameters and rasterize the exact indicator mask."""
    cx = rng.uniform(0.32 * hw, 0.68 * hw)
    cy = rng.uniform(0.32 * hw, 0.68 * hw)
    if class_name == "disk":
        return raster_disk(hw, cx, cy, rng.uniform(0.15 * hw, 0.28 * hw))
    if class_name == "square":
        return raster_square(hw, cx, cy, rng.uniform(0.14 * hw, 0.25 * hw))
    if class_name == "triangle":
        return raster_triangle(hw, cx, cy, rng.uniform(0.3 * hw, 0.48 * hw),
                               rng.uniform(0.28 * hw, 0.44 * hw))
    if class_name == "ring":
        r_out = rng.uniform(0.2 * hw, 0.28 * hw)
        return raster_ring(hw, cx, cy, r_out, r_out - rng.uniform(0.07 * hw, 0.11 * hw))
    if class_name == "cross":
        return raster_cross(hw, cx, cy, rng.uniform(0.05 * hw, 0.08 * hw),
                            rng.uniform(0.2 * hw, 0.3 * hw))
    if class_name == "bar":
        return raster_bar(hw, cx, cy, rng.uniform(0.24 * hw, 0.36 * hw),
                          rng.uniform(0.05 * hw, 0.08 * hw), rng.uniform(0, np.pi))
    if class_name == "ellipse":
        return raster_ellipse(hw, cx, cy, rng.uniform(0.2 * hw, 0.28 * hw),
                              rng.uniform(0.1 * hw, 0.15 * hw), rng.uniform(0, np.pi))
    if class_name == "diamond":
        return raster_diamond(hw, cx, cy, rng.uniform(0.18 * hw, 0.28 * hw))
    raise ValueError(f"unknown class {class_name!r}")


# ---------------------------------------------------------------------------
# backgrounds and composition


def _smooth_background(rng: np.random.Generator, hw: int) -> np.ndarray:
    c0 = rng.uniform(0.0, 1.0, 3)
    c1 = rng.uniform(0.0, 1.0, 3)
    theta = rng.uniform(0, 2 * np.pi)
    xx, yy = _grid(hw)
    proj = (np.cos(theta) * xx + np.sin(theta) * yy) / hw
    t = (proj - proj.min()) / max(proj.max() - proj.min(), 1e-9)
    return c0[None, None, :] + t[:, :, None] * (c1 - c0)[None, None, :]


def _checker_background(rng: np.random.Generator, hw: int) -> np.ndarray:
    cell = int(rng.choice([2, 3, 4]))
    c0 = rng.uniform(0.0, 1.0, 3)
    # moderate cell contrast: plenty of high-frequency signal for the
    # band-split branch, but the foreground speckle stays the most
    # energetic texture in every image
    c1 = np.clip(c0 + rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 0.18, 3), 0, 1)
    xx, yy = _grid(hw)
    parity = ((xx // cell).astype(int) + (yy // cell).astype(int)) % 2
    img = np.where(parity[:, :, None] == 0, c0[None, None, :], c1[None, None, :])
    ncell = hw // cell + 1
    jitter = rng.uniform(-0.04, 0.04, (ncell, ncell, 1))
    img = img + jitter[(yy // cell).astype(int), (xx // cell).astype(int)]
    return img


def render_sample(class_name: str, rng: np.random.Generator,
                  hw: int = IMAGE_HW) -> tuple[np.ndarray, np.ndarray]:
    """One (image, mask) pair: uint8 H x W x 3 and uint8 H x W in {0, 1}."""
    bg = _smooth_background(rng, hw) if rng.integers(2) == 0 else _checker_background(rng, hw)
    mask = shape_mask(class_name, rng, hw)

    bg_mean = bg.reshape(-1, 3).mean(axis=0)
    fg = rng.uniform(0.0, 1.0, 3)
    for _ in range(16):
        if np.linalg.norm(fg - bg_mean) >= 0.45:
            break
        fg = rng.uniform(0.0, 1.0, 3)
    else:
        fg = np.clip(1.0 - bg_mean, 0, 1)

    xx, yy = _grid(hw)
    shade = 0.08 * (xx + yy - hw) / hw
    img = bg.copy()
    img[mask] = fg[None, :] + shade[mask, None]
    # high-contrast speckle fill: the object interior carries the strongest
    # local texture in the image, so any energy-sensitive encoder has a
    # usable foreground cue on both background families
    img[mask] += rng.uniform(-0.35, 0.35, (int(mask.sum()), 3))
    img += rng.normal(0.0, 0.015, img.shape)
    img8 = np.clip(np.rint(np.clip(img, 0, 1) * 255), 0, 255).astype(np.uint8)
    return img8, mask.astype(np.uint8)


# ---------------------------------------------------------------------------
# corpus generation and loading


def _sample_rng(seed: int, class_id: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, class_id, index]))


def gen_dataset(out_dir: str | Path, seed: int, per_class: int, hw: int = IMAGE_HW) -> dict:
    """Render the full corpus and write PPM images, PGM masks, and
    manifest.json. Byte-deterministic for a given (seed, per_class)."""
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    items = []
    for class_id, name in enumerate(CLASS_NAMES):
        for idx in range(per_class):
            img, mask = render_sample(name, _sample_rng(seed, class_id, idx), hw)
            img_name = f"{name}_{idx:03d}.ppm"
            mask_name = f"{name}_{idx:03d}.pgm"
            fileio.write_ppm(out / img_name, img)
            fileio.write_pgm(out / mask_name, mask * np.uint8(255))
            items.append({"class_id": class_id, "class_name": name,
                          "image": img_name, "mask": mask_name})
    manifest = {"seed": seed, "per_class": per_class, "hw": hw,
                "classes": CLASS_NAMES, "items": items}
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8")
    return manifest


def load_manifest(data_dir: str | Path) -> dict:
    path = Path(data_dir) / "manifest.json"
    if not path.exists():
        raise ValueError(f"no manifest.json under {data_dir}")
    return json.loads(path.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# pseudo-embeddings


def _name_stream(name: str, seed: int, attempt: int) -> np.random.Generator:
    digest = hashlib.sha256(f"{name}|{seed}|{attempt}".encode("utf-8")).digest()
    return np.random.default_rng(np.frombuffer(digest[:16], dtype=np.uint64))


def gen_pseudo_embeddings(class_names: list[str], dim: int = 1024, seed: int = 0,
                          max_cos: float = 0.5) -> np.ndarray:
    """Deterministic unit vectors, one per class name.

    Each vector is seeded by sha256(name|seed|attempt), so a class keeps
    its vector across runs and table compositions unless a redraw fires.
    At dim >= 64 pairwise |cosine| below ``max_cos`` is enforced by
    redrawing the offending vector with a bumped attempt counter; below
    that dimension near-orthogonality is not promised.
    """
    if len(set(class_names)) != len(class_names):
        raise ValueError("duplicate class names")
    if dim < 1:
        raise ValueError("dim must be positive")
    rows: list[np.ndarray] = []
    for name in class_names:
        attempt = 0
        while True:
            v = _name_stream(name, seed, attempt).normal(size=dim)
            v /= np.linalg.norm(v)
            if dim < 64 or all(abs(float(v @ p)) < max_cos for p in rows):
                rows.append(v)
                break
            attempt += 1
    return np.stack(rows).astype(np.float32)
