"""Five-level convolutional feature extractor and the three task stems.

A compact stand-in for a pretrained backbone: each stage applies two 3×3
convs with ReLU and then halves the resolution with a 2×2 stride-2 conv.
The deepest level feeds three independent stems that initialize the
depth-wise, saliency-wise and contour-wise feature streams.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import tensor as T
from .layers import conv_init
from .tensor import Tensor


class FeatureTriple(NamedTuple):
    """The three per-task feature maps at one decoder level (equal shapes)."""

    d: Tensor
    s: Tensor
    c: Tensor

    def check(self) -> "FeatureTriple":
        if not (self.d.shape == self.s.shape == self.c.shape):
            raise ValueError(
                f"feature triple shapes differ: {self.d.shape}, {self.s.shape}, {self.c.shape}"
            )
        return self


@dataclass(frozen=True)
class EncoderConfig:
    channels: tuple[int, ...] = (16, 32, 64, 128, 256)
    input_size: int = 352
    stem_channels: int = 128

    def __post_init__(self):
        if len(self.channels) != 5:
            raise ValueError("encoder needs exactly 5 levels")
        if self.input_size % 32 != 0:
            raise ValueError(f"input_size must be divisible by 32, got {self.input_size}")

    @property
    def strides(self) -> tuple[int, ...]:
        return tuple(2 ** (i + 1) for i in range(5))


def init_encoder(rng: np.random.Generator, cfg: EncoderConfig) -> dict:
    params: dict = {}
    c_prev = 3
    for level, c in enumerate(cfg.channels, start=1):
        params[f"s{level}"] = {
            "c1": conv_init(rng, c, c_prev, 3),
            "c2": conv_init(rng, c, c, 3),
            "down": conv_init(rng, c, c, 2),  # 2x2 stride-2 keeps extents exactly halving
        }
        c_prev = c
    return params


def encode(rgb: Tensor, params: dict, cfg: EncoderConfig) -> list[Tensor]:
    """Run the five stages; level i has cfg.channels[i-1] channels at stride 2^i."""
    if rgb.shape != (3, cfg.input_size, cfg.input_size):
        raise ValueError(f"encode: expected (3, {cfg.input_size}, {cfg.input_size}), got {rgb.shape}")
    levels = []
    x = rgb
    for level in range(1, 6):
        p = params[f"s{level}"]
        x = T.conv2d(x, p["c1"]["w"], p["c1"]["b"], stride=1, pad=1).relu()
        x = T.conv2d(x, p["c2"]["w"], p["c2"]["b"], stride=1, pad=1).relu()
        x = T.conv2d(x, p["down"]["w"], p["down"]["b"], stride=2, pad=0).relu()
        levels.append(x)
    return levels


def init_stems(rng: np.random.Generator, cfg: EncoderConfig) -> dict:
    c5 = cfg.channels[-1]
    return {task: conv_init(rng, cfg.stem_channels, c5, 3) for task in ("d", "s", "c")}


def modality_stems(e5: Tensor, params: dict) -> FeatureTriple:
    """Three independent 3×3 conv+ReLU heads over the level-5 features."""
    outs = []
    for task in ("d", "s", "c"):
        p = params[task]
        outs.append(T.conv2d(e5, p["w"], p["b"], stride=1, pad=1).relu())
    return FeatureTriple(*outs).check()
