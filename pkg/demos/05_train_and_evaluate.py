"""End-to-end episodic walkthrough: build a corpus, train briefly on the
base classes of a fold, evaluate on the held-out classes, and round-trip
the checkpoint.

This is a narrative-scale run (a minute or so); the numbers it prints are
not the benchmark protocol, just enough movement to watch the pieces fit.

Run from the repository root:  python3 demos/05_train_and_evaluate.py
"""

import tempfile
from pathlib import Path

import numpy as np

from freqseg import (
    CLASS_NAMES,
    Dataset,
    Model,
    SplitConfig,
    TrainConfig,
    evaluate,
    gen_dataset,
    gen_pseudo_embeddings,
    smoothed_curve,
    train,
)
from freqseg.text_adapter import ClassEmbeddingTable

work = Path(tempfile.mkdtemp(prefix="freqseg-demo-"))
print(f"scratch dir: {work}")

print()
print("== corpus ==")
gen_dataset(work / "data", seed=3, per_class=8)
dataset = Dataset.load(work / "data")
print(f"{len(dataset.class_ids)} image/mask pairs over {len(dataset.class_names)} classes")

table = ClassEmbeddingTable.from_vectors(
    CLASS_NAMES, gen_pseudo_embeddings(CLASS_NAMES, dim=1024, seed=0))

split = SplitConfig.for_fold(0)
novel = [CLASS_NAMES[c] for c in split.novel_classes]
print(f"fold 0: held-out classes {novel}, training on the rest")

print()
print("== training on base-class episodes (weak supervision only) ==")
cfg = TrainConfig(seed=0, fold=0, episodes=600)
result = train(dataset, split, table, cfg)
sm = smoothed_curve(result.curve)
print(f"{cfg.episodes} episodes in {result.seconds:.1f}s; "
      f"loss {result.curve[0][1]:.4f} -> smoothed {sm[-1]:.4f}")

print()
print("== evaluation on the held-out classes ==")
report = evaluate(result.model, dataset, table, split.novel_classes,
                  episodes=24, shots=1, seed=5)
for c, iou in report.per_class.items():
    print(f"  {CLASS_NAMES[c]:8s}: iou {100 * iou:.1f}")
print(f"  mean {100 * report.mean:.1f} | all-foreground baseline "
      f"{100 * report.const_foreground_mean:.1f}")

print()
print("== checkpoint round trip ==")
ckpt = work / "checkpoint.bin"
result.model.save(ckpt, {"note": "demo"})
loaded, trailer = Model.load(ckpt)
same = all(np.array_equal(p.data, q.data)
           for (_, p), (_, q) in zip(result.model.trainable(), loaded.trainable()))
print(f"saved {ckpt.stat().st_size} bytes; reloaded parameters identical: {same}; "
      f"trailer note: {trailer.get('note')!r}")
