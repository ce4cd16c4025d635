"""Weakly-supervised few-shot semantic segmentation at desk scale.

A numpy library built on a from-scratch reverse-mode tape: frequency
decoupled multi-scale features, a text-embedding spatial adapter,
activation-map pseudo-labels, and an episodic training/evaluation
harness, plus binary fixture formats and a CLI.
"""

from .tensor import (
    REAL,
    GradCheckReport,
    Grads,
    Tape,
    Tensor,
    avg_pool2,
    bce,
    bilinear_resize,
    concat_channels,
    conv2d,
    ew_add,
    ew_mul,
    grad_check,
    is_recording,
    linear,
    max_normalize,
    relu,
    reshape,
    rms_normalize,
    scale,
    sigmoid,
    slice_channels,
    sum_all,
    weighted_channel_sum,
)
from .frequency import (
    CANONICAL_HW,
    PYRAMID,
    FrequencyPair,
    FrequencyParams,
    OctaveWeights,
    frequency_features,
    init_frequency_params,
    neighbor_decoder,
    octave_conv,
    octave_split,
    plain_features,
    realign_pair,
    toy_backbone,
)
from .text_adapter import (
    ADAPTER_SIZES_STUDIED,
    DEFAULT_ADAPTER_SIZE,
    AdapterParams,
    ClassEmbeddingTable,
    adapt_features,
    gate_features,
    init_adapter_params,
    text_to_grid,
)
from .masks import CAM_EPS, HeadParams, cam, init_head_params, seg_head
from .model import Model, ModelConfig, predict_query
from .harness import (
    Dataset,
    Episode,
    EvalReport,
    MiouReport,
    SplitConfig,
    TrainConfig,
    TrainResult,
    TrainingDiverged,
    evaluate,
    miou,
    sample_episode,
    smoothed_curve,
    total_loss,
    train,
)
from .data import CLASS_NAMES, IMAGE_HW, gen_dataset, gen_pseudo_embeddings, render_sample

__all__ = [name for name in dir() if not name.startswith("_")]
