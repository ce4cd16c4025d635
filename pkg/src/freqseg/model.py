"""Model assembly: parameter container, episode forward pass, prediction.

The trainable model is the frequency branch (or its plain control path),
the text adapter, and the segmentation head. Pseudo-mask generation uses
a small frozen encoder drawn independently at init plus a frozen random
projection of the class embedding; those tensors live in the checkpoint
under cam.* names but never receive updates, so the training targets stay
stationary while the trainable backbone moves.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import fileio
from .frequency import (
    CANONICAL_HW,
    FrequencyParams,
    frequency_features,
    init_frequency_params,
    init_tap_stages,
    plain_features,
)
from .masks import HeadParams, cam, init_head_params, seg_head
from .tensor import REAL, Tensor, bilinear_resize, is_recording
from .text_adapter import (
    AdapterParams,
    ClassEmbeddingTable,
    gate_features,
    init_adapter_params,
    text_to_grid,
)

CHECKPOINT_FORMAT = 1


def _box3(a: np.ndarray) -> np.ndarray:
    """3x3 edge-padded box mean over the spatial axes of a CxHxW array."""
    p = np.pad(a, ((0, 0), (1, 1), (1, 1)), mode="edge")
    h, w = a.shape[1], a.shape[2]
    return sum(p[:, i:i + h, j:j + w] for i in (0, 1, 2) for j in (0, 1, 2)) / np.float32(9.0)


@dataclass
class ModelConfig:
    in_channels: int = 3
    tap_channels: tuple[int, int, int] = (8, 12, 16)
    decoder_channels: int = 8
    fused_channels: int = 16
    head_hidden: int = 16
    iterations: int = 3
    adapter_size: int = 25
    embed_dim: int = 1024
    # the frozen activation-map encoder is a single conv/pool stage: its
    # 32x32 map localizes desk-scale shapes far better than the deeper,
    # coarser trainable branch taps would
    cam_channels: tuple[int, ...] = (16,)
    use_cfm: bool = True
    use_csm: bool = True

    def __post_init__(self):
        self.tap_channels = tuple(self.tap_channels)
        self.cam_channels = tuple(self.cam_channels)
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass
class Model:
    config: ModelConfig
    freq: FrequencyParams
    adapter: AdapterParams
    head: HeadParams
    cam_backbone: list[tuple[Tensor, Tensor]]  # frozen
    cam_proj: Tensor                           # frozen, cam_channels[-1] x embed_dim

    # ------------------------------------------------------------------
    # construction / serialization

    @classmethod
    def init(cls, seed: int, config: ModelConfig | None = None) -> "Model":
        config = config or ModelConfig()
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        freq = init_frequency_params(
            rng, config.in_channels, config.tap_channels,
            config.decoder_channels, config.fused_channels)
        adapter = init_adapter_params(rng, config.embed_dim, config.adapter_size)
        head = init_head_params(rng, config.fused_channels, config.head_hidden)
        # independent frozen draw: the activation-map encoder is a separate
        # network from the trainable branch, so priors and targets carry no
        # init-time correlation with the features
        cam_backbone = init_tap_stages(rng, config.in_channels, config.cam_channels)
        cam_proj = Tensor(rng.normal(0.0, 1.0 / np.sqrt(config.embed_dim),
                                     size=(config.cam_channels[-1], config.embed_dim)).astype(REAL))
        return cls(config, freq, adapter, head, cam_backbone, cam_proj)

    def trainable(self) -> list[tuple[str, Tensor]]:
        named: list[tuple[str, Tensor]] = []
        for i, (w, b) in enumerate(self.freq.backbone):
            named += [(f"backbone.{i}.w", w), (f"backbone.{i}.b", b)]
        for i, ow in enumerate(self.freq.octave):
            named += [(f"octave.{i}.w_hh", ow.w_hh), (f"octave.{i}.w_lh", ow.w_lh),
                      (f"octave.{i}.w_ll", ow.w_ll), (f"octave.{i}.w_hl", ow.w_hl),
                      (f"octave.{i}.b_h", ow.b_h), (f"octave.{i}.b_l", ow.b_l)]
        for i, (w, b) in enumerate(self.freq.tap_proj):
            named += [(f"tap_proj.{i}.w", w), (f"tap_proj.{i}.b", b)]
        named += [("fuse.w", self.freq.fuse_w), ("fuse.b", self.freq.fuse_b),
                  ("plain_fuse.w", self.freq.plain_fuse_w), ("plain_fuse.b", self.freq.plain_fuse_b),
                  ("adapter.w", self.adapter.weight), ("adapter.b", self.adapter.bias),
                  ("head.w1", self.head.w1), ("head.b1", self.head.b1),
                  ("head.w2", self.head.w2), ("head.b2", self.head.b2)]
        return named

    def frozen(self) -> list[tuple[str, Tensor]]:
        named = []
        for i, (w, b) in enumerate(self.cam_backbone):
            named += [(f"cam.backbone.{i}.w", w), (f"cam.backbone.{i}.b", b)]
        named.append(("cam.proj", self.cam_proj))
        return named

    def checkpoint_trailer(self, extra: dict | None = None) -> dict:
        cfg = asdict(self.config)
        cfg["tap_channels"] = list(self.config.tap_channels)
        cfg["cam_channels"] = list(self.config.cam_channels)
        trailer = {"format": CHECKPOINT_FORMAT, "model": cfg}
        if extra:
            trailer.update(extra)
        return trailer

    def save(self, path, extra: dict | None = None) -> None:
        fileio.write_checkpoint(path, self.trainable() + self.frozen(),
                                self.checkpoint_trailer(extra))

    @classmethod
    def load(cls, path) -> tuple["Model", dict]:
        named, trailer = fileio.read_checkpoint(path)
        cfg_dict = dict(trailer.get("model", {}))
        cfg_dict["tap_channels"] = tuple(cfg_dict.get("tap_channels", (8, 12, 16)))
        cfg_dict["cam_channels"] = tuple(cfg_dict.get("cam_channels", (16,)))
        config = ModelConfig(**cfg_dict)
        model = cls.init(0, config)
        table = dict(named)
        for name, slot in model.trainable() + model.frozen():
            if name not in table:
                raise ValueError(f"checkpoint missing tensor {name!r}")
            src = table[name]
            if src.data.shape != slot.data.shape:
                raise ValueError(f"checkpoint tensor {name!r} has shape {src.data.shape}, "
                                 f"expected {slot.data.shape}")
            slot.data[...] = src.data
        return model, trailer

    # ------------------------------------------------------------------
    # forward pieces

    def features(self, image: Tensor) -> Tensor:
        if self.config.use_cfm:
            return frequency_features(image, self.freq)
        return plain_features(image, self.freq)

    def _cam_tap(self, image: Tensor) -> Tensor:
        """Local RMS contrast of the last frozen-encoder tap.

        Each channel is centered over space, then reduced to its 3x3-mean
        RMS envelope: a local-texture energy detector, high wherever
        activations deviate from their scene level in either direction. The
        square root keeps the envelope from collapsing to speckle peaks, so
        the map saturates across whole objects. The envelope is centered
        again before mixing; raw envelopes are nonnegative, so a weighted
        channel sum would otherwise ride a positive DC level and come out
        diffuse. Zero-mean channels keep every weighted sum zero-mean, so
        its relu is a sparse salience map that cannot be identically zero
        unless a channel is exactly constant.
        """
        from .frequency import toy_backbone

        tap = toy_backbone(image, self.cam_backbone)[-1].data
        z = tap - tap.mean(axis=(1, 2), keepdims=True)
        e = np.sqrt(_box3(z * z))
        return Tensor(e - e.mean(axis=(1, 2), keepdims=True))

    def pseudo_mask(self, image: Tensor, class_vec: Tensor) -> Tensor:
        """Soft target mask at the activation-map resolution. Tape must be off.

        The mixing weights are the magnitudes of the projected embedding: the
        zero-mean energy channels share a foreground component, and a signed
        mixture would cancel it (or invert it) for roughly half the classes,
        leaving maps that track texture noise instead of objects.
        """
        if is_recording():
            raise RuntimeError("pseudo-mask generation must not be recorded")
        emb = Tensor(np.abs(self.cam_proj.data @ class_vec.data))
        return cam(self._cam_tap(image), emb)

    def episode_masks(self, image: Tensor, class_vec: Tensor) -> tuple[Tensor, Tensor]:
        """(training target at image resolution, head init at the canonical
        grid), both derived from one activation map."""
        pm = self.pseudo_mask(image, class_vec)
        h, w = image.data.shape[1:]
        return (bilinear_resize(pm, h, w),
                bilinear_resize(pm, CANONICAL_HW, CANONICAL_HW))

    @staticmethod
    def support_prior(support_inits: list[Tensor]) -> Tensor:
        """Head init for the query pass: the supports' canonical-grid maps
        averaged. It tells the head what the class looks like and roughly
        how much area it covers, but nothing about where the query instance
        sits, so query localization has to come from the features. The
        query's own map is never fed back as its init; that would let the
        head learn to copy its input and make the support set irrelevant.
        """
        if not support_inits:
            raise ValueError("support_prior needs at least one support map")
        if len(support_inits) == 1:
            return support_inits[0]
        return Tensor(np.mean([m.data for m in support_inits], axis=0).astype(REAL))

    def branch_masks(self, image: Tensor, init_mask: Tensor, t_grid: Tensor | None) -> list[Tensor]:
        """Feature path plus head for one image; returns per-iteration masks
        at image resolution."""
        f = self.features(image)
        if t_grid is not None:
            f = gate_features(f, t_grid)
        h, w = image.data.shape[1:]
        return seg_head(f, init_mask, self.head, self.config.iterations, h, w)

    def class_grid(self, table: ClassEmbeddingTable, class_id: int) -> Tensor | None:
        if not self.config.use_csm:
            return None
        return text_to_grid(table.vector(class_id), self.adapter)


def predict_query(model: Model, support_images: list[Tensor], query_image: Tensor,
                  class_id: int, table: ClassEmbeddingTable) -> np.ndarray:
    """Binary query mask for one episode: full pipeline initialized from the
    support prior, last-iteration mask, threshold 0.5 (exact 0.5 maps to
    background)."""
    vec = table.vector(class_id)
    inits = [model.episode_masks(img, vec)[1] for img in support_images]
    masks = model.branch_masks(query_image, Model.support_prior(inits),
                               model.class_grid(table, class_id))
    return (masks[-1].data[0] > 0.5).astype(np.uint8)
