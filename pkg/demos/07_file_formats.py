"""File format walkthrough: every binary format in the toolkit, written
and read back, including the embedding table produced by the TypeScript
exporter in clip-export/.

Run from the repository root:  python3 demos/07_file_formats.py
"""

import tempfile
from pathlib import Path

import numpy as np

from freqseg import REAL, Tensor, gen_pseudo_embeddings
from freqseg import fileio

work = Path(tempfile.mkdtemp(prefix="freqseg-formats-"))
repo = Path(__file__).resolve().parents[1]

print("== TEN0: a single tensor ==")
t = Tensor(np.arange(24, dtype=REAL).reshape(2, 3, 4))
fileio.write_ten0(work / "t.ten0", t)
back = fileio.read_ten0(work / "t.ten0")
raw = (work / "t.ten0").read_bytes()
print(f"shape {t.shape} -> {len(raw)} bytes "
      f"(magic {raw[:4]!r}, then u32 ndim, dims, float32 payload)")
print(f"round trip identical: {np.array_equal(t.data, back.data)}")

print()
print("== netpbm: images and masks ==")
img = (np.random.default_rng(0).uniform(0, 255, (8, 8, 3))).astype(np.uint8)
fileio.write_ppm(work / "img.ppm", img)
mask = (img[:, :, 0] > 127).astype(np.uint8) * np.uint8(255)
fileio.write_pgm(work / "mask.pgm", mask)
print(f"PPM round trip: {np.array_equal(fileio.read_ppm(work / 'img.ppm'), img)}")
print(f"PGM round trip: {np.array_equal(fileio.read_pgm(work / 'mask.pgm'), mask)}")

print()
print("== CLIPEMB1: class-name embedding tables ==")
names = ["disk", "square", "triangle"]
vectors = gen_pseudo_embeddings(names, dim=64, seed=0)
fileio.write_clipemb(work / "table.bin", names, vectors)
back_names, back_vecs = fileio.read_clipemb(work / "table.bin")
print(f"wrote {len(names)} x 64 table; round trip identical: "
      f"{back_names == names and np.array_equal(back_vecs, vectors)}")

golden = repo / "clip-export" / "tests" / "fixtures" / "dogcat.clipemb"
if golden.exists():
    g_names, g_vecs = fileio.read_clipemb(golden)
    norms = np.linalg.norm(g_vecs, axis=1)
    print(f"TypeScript exporter file: classes {g_names}, dim {g_vecs.shape[1]}, "
          f"norms {norms.min():.2f}..{norms.max():.2f} (not unit, stored as given)")

print()
print("== loss CSV ==")
curve = [(0, 2.5), (1, 1.75), (2, 1.3125)]
fileio.write_loss_csv(work / "loss.csv", curve)
print((work / "loss.csv").read_text(), end="")
print(f"round trip identical: {fileio.read_loss_csv(work / 'loss.csv') == curve}")

print()
print("== checkpoint container ==")
named = [("layer.w", Tensor(np.ones((2, 2), dtype=REAL))),
         ("layer.b", Tensor(np.zeros(2, dtype=REAL)))]
fileio.write_checkpoint(work / "ckpt.bin", named, {"format": 1, "note": "demo"})
back_named, trailer = fileio.read_checkpoint(work / "ckpt.bin")
print(f"records {[n for n, _ in back_named]}, trailer {trailer}")
print(f"scratch dir: {work}")
