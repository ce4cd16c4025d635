"""Text-conditioned spatial gating (the csm branch).

A frozen table maps class names to unit-norm embedding vectors. A single
trainable linear layer projects the episode's class vector to an s*s grid
(row-major reshape; s is the adapter size, default 25), and features are
gated by that grid: downsample to the adapter grid, multiply, upsample
back. The same projection is applied to support and query features, so
the adapter is the only text-side trainable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import REAL, Tensor, bilinear_resize, concat_channels, ew_mul, linear, reshape

DEFAULT_ADAPTER_SIZE = 25
ADAPTER_SIZES_STUDIED = (20, 25, 50)


@dataclass
class ClassEmbeddingTable:
    """Frozen class-name -> vector table. Vectors are stored as given
    (finite float32, one per name, uniform dim); unit norm is not required,
    matching what real text encoders emit. Duplicate names are rejected."""

    class_names: list[str]
    vectors: np.ndarray  # num_classes x dim, float32

    @classmethod
    def from_vectors(cls, class_names: list[str], vectors: np.ndarray) -> "ClassEmbeddingTable":
        if len(set(class_names)) != len(class_names):
            raise ValueError("duplicate class names in embedding table")
        if vectors.ndim != 2 or vectors.shape[0] != len(class_names):
            raise ValueError("embedding table needs one vector per class name")
        v = np.asarray(vectors, dtype=REAL).copy()
        if not np.all(np.isfinite(v)):
            raise ValueError("embedding vectors must be finite")
        return cls(list(class_names), v)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def class_id(self, name: str) -> int:
        try:
            return self.class_names.index(name)
        except ValueError:
            raise KeyError(f"unknown class {name!r}") from None

    def vector(self, class_id: int) -> Tensor:
        if not (0 <= class_id < len(self.class_names)):
            raise ValueError(f"class id {class_id} out of range")
        return Tensor(self.vectors[class_id])


@dataclass
class AdapterParams:
    """Linear projection from embedding dim to adapter_size**2 values."""

    weight: Tensor
    bias: Tensor
    adapter_size: int


def init_adapter_params(rng: np.random.Generator, embed_dim: int,
                        adapter_size: int = DEFAULT_ADAPTER_SIZE) -> AdapterParams:
    if adapter_size < 1:
        raise ValueError("adapter_size must be positive")
    n = adapter_size * adapter_size
    # bias at one so the gate starts near pass-through
    weight = Tensor(rng.normal(0.0, 0.02, size=(n, embed_dim)).astype(REAL))
    bias = Tensor(np.ones(n, dtype=REAL))
    return AdapterParams(weight, bias, adapter_size)


def text_to_grid(t: Tensor, params: AdapterParams) -> Tensor:
    """Project an embedding vector to a 1 x s x s spatial grid (row-major)."""
    if t.data.ndim != 1:
        raise ValueError("text_to_grid expects a flat embedding vector")
    s = params.adapter_size
    flat = linear(t, params.weight, params.bias)
    return reshape(flat, (1, s, s))


def gate_features(f: Tensor, t_grid: Tensor) -> Tensor:
    """Downsample f to the adapter grid, gate by t_grid, upsample back.

    The grid has one channel and is broadcast across all feature channels.
    At the default adapter size the path is exactly 50 -> 25 -> 50.
    """
    if f.data.ndim != 3 or t_grid.data.ndim != 3 or t_grid.data.shape[0] != 1:
        raise ValueError("gate_features expects f: CxHxW and t_grid: 1xsxs")
    c, h, w = f.data.shape
    _, s, s2 = t_grid.data.shape
    if h != w or s != s2:
        raise ValueError("gate_features expects square feature and adapter grids")
    if s > h:
        raise ValueError(f"adapter grid {s} exceeds feature grid {h}")
    down = bilinear_resize(f, s, s)
    gate = concat_channels([t_grid] * c) if c > 1 else t_grid
    fused = ew_mul(down, gate)
    return bilinear_resize(fused, h, w)


def adapt_features(f_support: Tensor, f_query: Tensor, class_id: int,
                   table: ClassEmbeddingTable, params: AdapterParams) -> tuple[Tensor, Tensor]:
    """Gate support and query features with one shared grid for the class."""
    t_grid = text_to_grid(table.vector(class_id), params)
    return gate_features(f_support, t_grid), gate_features(f_query, t_grid)
