"""Episodic training and evaluation.

Episodes are 1-way K-shot: one class, K support images and one query
image of that class. Ground-truth masks ride along for evaluation only;
training supervision comes entirely from the activation-map pseudo-masks
(weak, image-level class labels). The loss sums per-iteration BCE terms
for the support and query branches with weights alpha and beta.

Everything is seeded: model init, episode sampling, and the SGD walk are
bitwise reproducible for a given config on one machine.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fileio
from .data import load_manifest
from .model import Model, ModelConfig, predict_query
from .tensor import REAL, Tape, Tensor, bce, ew_add, scale
from .text_adapter import ClassEmbeddingTable


class TrainingDiverged(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# dataset and episodes


@dataclass
class Dataset:
    images: np.ndarray      # N x 3 x H x W float32 in [0, 1]
    masks: np.ndarray       # N x H x W uint8 in {0, 1}
    class_ids: np.ndarray   # N int64
    class_names: list[str]

    @classmethod
    def load(cls, data_dir: str | Path) -> "Dataset":
        manifest = load_manifest(data_dir)
        root = Path(data_dir)
        images, masks, ids = [], [], []
        for item in manifest["items"]:
            img = fileio.read_ppm(root / item["image"]).astype(REAL) / REAL(255)
            images.append(np.transpose(img, (2, 0, 1)))
            masks.append((fileio.read_pgm(root / item["mask"]) > 127).astype(np.uint8))
            ids.append(item["class_id"])
        return cls(np.stack(images), np.stack(masks), np.asarray(ids, dtype=np.int64),
                   list(manifest["classes"]))

    def indices_of(self, class_id: int) -> np.ndarray:
        return np.nonzero(self.class_ids == class_id)[0]


@dataclass
class SplitConfig:
    """Fold layout: fold f holds classes {2f, 2f+1} out for meta-test."""

    fold: int
    base_classes: tuple[int, ...]
    novel_classes: tuple[int, ...]

    @classmethod
    def for_fold(cls, fold: int, num_classes: int = 8, per_fold: int = 2) -> "SplitConfig":
        if num_classes % per_fold:
            raise ValueError("num_classes must be divisible by per_fold")
        folds = num_classes // per_fold
        if not (0 <= fold < folds):
            raise ValueError(f"fold must be in [0, {folds}), got {fold}")
        novel = tuple(range(per_fold * fold, per_fold * (fold + 1)))
        base = tuple(c for c in range(num_classes) if c not in novel)
        return cls(fold, base, novel)


@dataclass
class Episode:
    support_images: list[Tensor]
    support_gt: list[np.ndarray]
    query_image: Tensor
    query_gt: np.ndarray
    class_id: int


def sample_episode(dataset: Dataset, classes: tuple[int, ...], shots: int,
                   rng: np.random.Generator) -> Episode:
    """One episode with K+1 distinct images of a uniformly drawn class."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    class_id = int(classes[rng.integers(len(classes))])
    pool = dataset.indices_of(class_id)
    if len(pool) < shots + 1:
        raise ValueError(f"class {class_id} has {len(pool)} images, needs {shots + 1}")
    picks = rng.choice(pool, size=shots + 1, replace=False)
    sup, q = picks[:shots], int(picks[shots])
    return Episode(
        support_images=[Tensor(dataset.images[int(i)]) for i in sup],
        support_gt=[dataset.masks[int(i)] for i in sup],
        query_image=Tensor(dataset.images[q]),
        query_gt=dataset.masks[q],
        class_id=class_id)


# ---------------------------------------------------------------------------
# loss


def total_loss(support_masks: list[Tensor], query_masks: list[Tensor],
               pseudo_support: Tensor, pseudo_query: Tensor,
               alpha: float, beta: float) -> Tensor:
    """Sum over iterations of alpha * BCE(support) + beta * BCE(query)."""
    if len(support_masks) != len(query_masks) or not support_masks:
        raise ValueError("need matching non-empty per-iteration mask lists")
    acc = None
    for ms, mq in zip(support_masks, query_masks):
        term = ew_add(scale(bce(ms, pseudo_support), alpha),
                      scale(bce(mq, pseudo_query), beta))
        acc = term if acc is None else ew_add(acc, term)
    return acc


def _episode_targets(model: Model, episode: Episode,
                     table: ClassEmbeddingTable) -> tuple[list, tuple]:
    """Pseudo-mask targets and head inits for every image of the episode.

    Support passes are initialized from their own maps; the query pass is
    initialized from the support prior, mirroring prediction (the query's
    own map appears only as its target). Must run with no tape active:
    targets are constants to the optimizer, and the model refuses to
    generate them under recording.
    """
    class_vec = table.vector(episode.class_id)
    sup = [model.episode_masks(img, class_vec) for img in episode.support_images]
    target_q, _ = model.episode_masks(episode.query_image, class_vec)
    init_q = Model.support_prior([init for _, init in sup])
    return sup, (target_q, init_q)


def _episode_loss(model: Model, episode: Episode, table: ClassEmbeddingTable,
                  targets_inits: list, query_ti: tuple,
                  alpha: float, beta: float) -> Tensor:
    """K-shot generalization: the support BCE at each iteration averages
    over shots. Equals total_loss verbatim at K=1."""
    target_q, init_q = query_ti
    t_grid = model.class_grid(table, episode.class_id)
    support_runs = [model.branch_masks(img, init, t_grid)
                    for img, (_, init) in zip(episode.support_images, targets_inits)]
    query_masks = model.branch_masks(episode.query_image, init_q, t_grid)

    k = len(support_runs)
    if k == 1:
        return total_loss(support_runs[0], query_masks, targets_inits[0][0], target_q,
                          alpha, beta)
    acc = None
    for it in range(len(query_masks)):
        sup = None
        for run, (target_s, _) in zip(support_runs, targets_inits):
            term = bce(run[it], target_s)
            sup = term if sup is None else ew_add(sup, term)
        term = ew_add(scale(sup, alpha / k), scale(bce(query_masks[it], target_q), beta))
        acc = term if acc is None else ew_add(acc, term)
    return acc


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    seed: int = 0
    fold: int = 0
    shots: int = 1
    episodes: int = 200
    lr: float = 3e-3
    momentum: float = 0.9
    alpha: float = 1.0
    beta: float = 1.0
    clip_norm: float | None = 5.0      # global gradient-norm ceiling, None disables
    replay_episodes: int | None = None  # cycle a frozen pool instead of resampling

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if not (0 <= self.momentum < 1):
            raise ValueError("momentum must be in [0, 1)")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive when set")


@dataclass
class TrainResult:
    model: Model
    curve: list[tuple[int, float]]
    seconds: float
    # pool-averaged loss at the untrained parameters; only computed when a
    # replay pool is active (the pool is frozen, so "the loss before any
    # update" is well defined)
    initial_loss: float | None = None


def train(dataset: Dataset, split: SplitConfig, table: ClassEmbeddingTable,
          config: TrainConfig, model_config: ModelConfig | None = None) -> TrainResult:
    """SGD with momentum over sampled episodes of the base classes.

    Gradients are jointly rescaled when their global norm exceeds
    config.clip_norm; the first updates otherwise overshoot badly enough
    that momentum spends most of a short run recovering. The learning rate
    follows a cosine decay from config.lr to 1% of it across the run.
    Non-finite values anywhere in the step raise TrainingDiverged with the
    step index. Two runs with identical configs produce bitwise-identical
    parameters and loss curves.
    """
    ss = np.random.SeedSequence(config.seed)
    model_seed, episode_seed = ss.spawn(2)
    model = Model.init(int(model_seed.generate_state(1)[0]), model_config)
    rng = np.random.default_rng(episode_seed)

    pool = None
    initial_loss = None
    if config.replay_episodes is not None:
        if config.replay_episodes < 1:
            raise ValueError("replay_episodes must be >= 1 when set")
        pool = [sample_episode(dataset, split.base_classes, config.shots, rng)
                for _ in range(config.replay_episodes)]
        vals = []
        for ep in pool:
            ti, qti = _episode_targets(model, ep, table)
            vals.append(_episode_loss(model, ep, table, ti, qti,
                                      config.alpha, config.beta).item())
        initial_loss = float(np.mean(vals))

    named = model.trainable()
    velocity = {name: np.zeros_like(p.data) for name, p in named}
    curve: list[tuple[int, float]] = []
    t0 = time.monotonic()
    for step in range(config.episodes):
        episode = (pool[step % len(pool)] if pool is not None
                   else sample_episode(dataset, split.base_classes, config.shots, rng))
        targets_inits, query_ti = _episode_targets(model, episode, table)
        try:
            with Tape() as tape:
                loss = _episode_loss(model, episode, table, targets_inits, query_ti,
                                     config.alpha, config.beta)
            grads = tape.backward(loss)
        except ValueError as e:
            if "non-finite" in str(e):
                last = curve[-1][1] if curve else float("nan")
                raise TrainingDiverged(
                    f"non-finite values at step {step} (last loss {last:.6g})") from None
            raise
        loss_val = loss.item()
        if not np.isfinite(loss_val):
            raise TrainingDiverged(f"non-finite loss at step {step}")
        step_grads = [grads.of(p) for _, p in named]
        if config.clip_norm is not None:
            norm = float(np.sqrt(sum(
                float((g.astype(np.float64) ** 2).sum()) for g in step_grads)))
            if norm > config.clip_norm:
                r = REAL(config.clip_norm / norm)
                step_grads = [g * r for g in step_grads]
        # cosine decay to 1% of the base rate: a run ends settled instead of
        # oscillating at a momentum-scaled constant step, which otherwise
        # leaves the final parameters at an init-dependent distance from
        # the minimum
        frac = step / max(config.episodes - 1, 1)
        lr_now = config.lr * (0.01 + 0.99 * 0.5 * (1.0 + np.cos(np.pi * frac)))
        mu, lr = REAL(config.momentum), REAL(lr_now)
        for (name, p), g in zip(named, step_grads):
            v = velocity[name]
            v *= mu
            v += g
            p.data -= lr * v
        curve.append((step, loss_val))
    return TrainResult(model, curve, time.monotonic() - t0, initial_loss)


def smoothed_curve(curve: list[tuple[int, float]], window: int = 8) -> list[float]:
    """Trailing moving average used by the smoke criterion."""
    vals = [l for _, l in curve]
    out = []
    for i in range(len(vals)):
        lo = max(0, i - window + 1)
        out.append(float(np.mean(vals[lo:i + 1])))
    return out


# ---------------------------------------------------------------------------
# metrics


@dataclass
class MiouReport:
    per_class: dict[int, float]
    mean: float


def miou(preds: list[np.ndarray], gts: list[np.ndarray], class_ids: list[int]) -> MiouReport:
    """Foreground IoU per class, macro-averaged over classes present.

    TP/FP/FN accumulate over all episodes of a class before the division;
    a zero union (no foreground anywhere in predictions or truth) counts
    as IoU 1.0.
    """
    if not (len(preds) == len(gts) == len(class_ids)) or not preds:
        raise ValueError("need matching non-empty prediction/target/class lists")
    tallies: dict[int, np.ndarray] = {}
    for p, g, c in zip(preds, gts, class_ids):
        if p.shape != g.shape:
            raise ValueError("prediction and target shapes differ")
        pb = p.astype(bool)
        gb = g.astype(bool)
        t = tallies.setdefault(int(c), np.zeros(3, dtype=np.int64))
        t[0] += int(np.count_nonzero(pb & gb))
        t[1] += int(np.count_nonzero(pb & ~gb))
        t[2] += int(np.count_nonzero(~pb & gb))
    per_class = {}
    for c, (tp, fp, fn) in sorted(tallies.items()):
        union = tp + fp + fn
        per_class[c] = float(tp / union) if union else 1.0
    return MiouReport(per_class, float(np.mean(list(per_class.values()))))


@dataclass
class EvalReport:
    per_class: dict[int, float]
    mean: float
    const_foreground_mean: float
    const_background_mean: float
    episodes: int


def evaluate(model: Model, dataset: Dataset, table: ClassEmbeddingTable,
             classes: tuple[int, ...], episodes: int, shots: int, seed: int) -> EvalReport:
    """Predict query masks over seeded episodes and score against ground
    truth, alongside constant all-foreground / all-background baselines."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xE7A1]))
    preds, gts, ids = [], [], []
    for _ in range(episodes):
        ep = sample_episode(dataset, classes, shots, rng)
        preds.append(predict_query(model, ep.support_images, ep.query_image,
                                   ep.class_id, table))
        gts.append(ep.query_gt)
        ids.append(ep.class_id)
    report = miou(preds, gts, ids)
    ones = [np.ones_like(g) for g in gts]
    zeros = [np.zeros_like(g) for g in gts]
    return EvalReport(report.per_class, report.mean,
                      miou(ones, gts, ids).mean, miou(zeros, gts, ids).mean,
                      episodes)
