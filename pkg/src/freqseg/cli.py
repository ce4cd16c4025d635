"""Command-line front end.

Subcommands: gen-data, gen-embeddings, train, eval, gradcheck, cam-dump,
ablate. Common flags: --seed, --fold, --shots, and --config pointing at a
JSON file whose keys mirror the training/model config fields; explicit
flags override config-file values. Exit code 0 on success, nonzero with a
message on any constraint violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import data, fileio
from .harness import Dataset, SplitConfig, TrainConfig, evaluate, smoothed_curve, train
from .model import Model, ModelConfig
from .tensor import Tensor, bilinear_resize
from .text_adapter import ClassEmbeddingTable
from .verify import run_gradient_suite

VARIANTS = {
    "baseline": (False, False),
    "cfm": (True, False),
    "csm": (False, True),
    "cfm+csm": (True, True),
}


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(cfg, dict):
        raise ValueError("--config must hold a JSON object")
    known = {f.name for f in fields(TrainConfig)} | {f.name for f in fields(ModelConfig)}
    unknown = set(cfg) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _split_configs(cfg: dict, overrides: dict) -> tuple[TrainConfig, ModelConfig]:
    merged = dict(cfg)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    train_keys = {f.name for f in fields(TrainConfig)}
    model_keys = {f.name for f in fields(ModelConfig)}
    tc = TrainConfig(**{k: v for k, v in merged.items() if k in train_keys})
    mc_kwargs = {k: v for k, v in merged.items() if k in model_keys}
    if "tap_channels" in mc_kwargs:
        mc_kwargs["tap_channels"] = tuple(mc_kwargs["tap_channels"])
    return tc, ModelConfig(**mc_kwargs)


def _load_table(path: str) -> ClassEmbeddingTable:
    names, vectors = fileio.read_clipemb(path)
    return ClassEmbeddingTable.from_vectors(names, vectors)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--fold", type=int, default=None)
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--config", type=str, default=None, help="JSON config file")


def _cmd_gen_data(args) -> int:
    manifest = data.gen_dataset(args.out, args.seed if args.seed is not None else 0,
                                args.per_class)
    print(f"wrote {len(manifest['items'])} image/mask pairs to {args.out}")
    return 0


def _cmd_gen_embeddings(args) -> int:
    names = args.classes.split(",") if args.classes else list(data.CLASS_NAMES)
    vectors = data.gen_pseudo_embeddings(names, dim=args.dim,
                                         seed=args.seed if args.seed is not None else 0)
    fileio.write_clipemb(args.out, names, vectors)
    print(f"wrote {len(names)} embeddings of dim {args.dim} to {args.out}")
    return 0


def _train_once(args, overrides_extra=None) -> tuple:
    cfg = _load_config_file(args.config)
    overrides = {"seed": args.seed, "fold": args.fold, "shots": args.shots}
    overrides.update(overrides_extra or {})
    if getattr(args, "episodes", None) is not None:
        overrides["episodes"] = args.episodes
    if getattr(args, "lr", None) is not None:
        overrides["lr"] = args.lr
    tc, mc = _split_configs(cfg, overrides)
    dataset = Dataset.load(args.data)
    table = _load_table(args.embeddings)
    split = SplitConfig.for_fold(tc.fold, num_classes=len(dataset.class_names))
    result = train(dataset, split, table, tc, mc)
    return result, tc, mc, dataset, table, split


def _cmd_train(args) -> int:
    result, tc, mc, *_ = _train_once(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from dataclasses import asdict

    trailer_extra = {"train": asdict(tc)}
    result.model.save(out / "checkpoint.bin", trailer_extra)
    fileio.write_loss_csv(out / "loss.csv", result.curve)
    sm = smoothed_curve(result.curve)
    print(f"trained {tc.episodes} episodes in {result.seconds:.1f}s; "
          f"loss {result.curve[0][1]:.4f} -> smoothed {sm[-1]:.4f}")
    print(f"checkpoint: {out / 'checkpoint.bin'}")
    return 0


def _cmd_eval(args) -> int:
    model, trailer = Model.load(args.checkpoint)
    dataset = Dataset.load(args.data)
    table = _load_table(args.embeddings)
    fold = args.fold if args.fold is not None else trailer.get("train", {}).get("fold", 0)
    split = SplitConfig.for_fold(fold, num_classes=len(dataset.class_names))
    classes = split.novel_classes if args.classes == "novel" else split.base_classes
    report = evaluate(model, dataset, table, classes,
                      episodes=args.episodes,
                      shots=args.shots if args.shots is not None else 1,
                      seed=args.seed if args.seed is not None else 0)
    for c, iou in report.per_class.items():
        print(f"class {c} ({dataset.class_names[c]}): iou {100 * iou:.2f}")
    print(f"miou {100 * report.mean:.2f} | const-foreground {100 * report.const_foreground_mean:.2f} "
          f"| const-background {100 * report.const_background_mean:.2f}")
    if args.out:
        Path(args.out).write_text(json.dumps({
            "per_class": {str(k): v for k, v in report.per_class.items()},
            "miou": report.mean,
            "const_foreground": report.const_foreground_mean,
            "const_background": report.const_background_mean,
            "episodes": report.episodes,
        }, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return 0


def _cmd_gradcheck(args) -> int:
    base = args.seed if args.seed is not None else 0
    seeds = [base + i for i in range(args.seeds)]
    worst = run_gradient_suite(seeds, rel_tol=args.tol, e2e_coords=args.coords)
    failed = {k: v for k, v in worst.items() if v >= args.tol}
    for name, err in sorted(worst.items()):
        status = "ok" if err < args.tol else "FAIL"
        print(f"{status:4s} {name}: max err {err:.2e}")
    if failed:
        print(f"{len(failed)} check(s) at or above tol {args.tol}", file=sys.stderr)
        return 1
    return 0


def _cmd_cam_dump(args) -> int:
    dataset = Dataset.load(args.data)
    table = _load_table(args.embeddings)
    if args.checkpoint:
        model, _ = Model.load(args.checkpoint)
    else:
        model = Model.init(args.seed if args.seed is not None else 0)
    if not (0 <= args.index < len(dataset.images)):
        raise ValueError(f"--index out of range (dataset has {len(dataset.images)} items)")
    image = Tensor(dataset.images[args.index])
    class_id = int(dataset.class_ids[args.index])
    pm = model.pseudo_mask(image, table.vector(class_id))
    h, w = image.data.shape[1:]
    up = bilinear_resize(pm, h, w)
    fileio.write_pgm(args.out, np.clip(np.rint(up.data[0] * 255), 0, 255).astype(np.uint8))
    print(f"wrote activation mask for item {args.index} "
          f"(class {dataset.class_names[class_id]}) to {args.out}")
    return 0


def _cmd_ablate(args) -> int:
    variant_names = [v.strip() for v in args.modules.split(",") if v.strip()]
    for v in variant_names:
        if v not in VARIANTS:
            raise ValueError(f"unknown variant {v!r}; choose from {sorted(VARIANTS)}")
    base_seed = args.seed if args.seed is not None else 0
    seeds = [base_seed + i for i in range(args.seeds)]
    rows = []
    for variant in variant_names:
        use_cfm, use_csm = VARIANTS[variant]
        mious = []
        for s in seeds:
            sub = argparse.Namespace(**vars(args))
            sub.seed = s
            result, tc, mc, dataset, table, split = _train_once(
                sub, {"use_cfm": use_cfm, "use_csm": use_csm})
            report = evaluate(result.model, dataset, table, split.novel_classes,
                              episodes=args.eval_episodes, shots=tc.shots, seed=s)
            mious.append(report.mean)
            print(f"{variant} seed {s}: novel miou {100 * report.mean:.2f} "
                  f"({result.seconds:.0f}s train)")
        rows.append((variant, float(np.mean(mious)), mious))
    lines = ["variant,miou_mean," + ",".join(f"miou_seed{i}" for i in range(len(seeds)))]
    for variant, mean, mious in rows:
        lines.append(f"{variant},{100 * mean:.4f}," + ",".join(f"{100 * m:.4f}" for m in mious))
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(rows)}-row summary to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freqseg",
                                     description="weakly-supervised few-shot segmentation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="render the synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=20)
    _add_common(p)
    p.set_defaults(fn=_cmd_gen_data)

    p = sub.add_parser("gen-embeddings", help="write deterministic class embeddings")
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=1024)
    p.add_argument("--classes", type=str, default=None, help="comma-separated names")
    _add_common(p)
    p.set_defaults(fn=_cmd_gen_embeddings)

    p = sub.add_parser("train", help="train on the base classes of a fold")
    p.add_argument("--data", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    _add_common(p)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on sampled episodes")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--episodes", type=int, default=200)
    p.add_argument("--classes", choices=["novel", "base"], default="novel")
    p.add_argument("--out", type=str, default=None, help="optional JSON report path")
    _add_common(p)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--tol", type=float, default=1e-2)
    p.add_argument("--coords", type=int, default=2)
    _add_common(p)
    p.set_defaults(fn=_cmd_gradcheck)

    p = sub.add_parser("cam-dump", help="write one activation pseudo-mask as PGM")
    p.add_argument("--data", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--checkpoint", type=str, default=None)
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=_cmd_cam_dump)

    p = sub.add_parser("ablate", help="train and score module-toggle variants")
    p.add_argument("--data", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--modules", type=str, default="baseline,cfm,cfm+csm")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--eval-episodes", type=int, default=200)
    p.add_argument("--lr", type=float, default=None)
    _add_common(p)
    p.set_defaults(fn=_cmd_ablate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
