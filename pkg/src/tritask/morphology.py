"""Binary morphology with full-ones square structuring elements.

Dilation minus erosion of the saliency mask yields the contour target;
both operate under zero padding, so erosion shrinks away from borders.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MorphConfig:
    """Structuring element size for contour extraction (odd, default 3)."""

    m: int = 3

    def __post_init__(self):
        if self.m < 1 or self.m % 2 == 0:
            raise ValueError(f"structuring element size must be odd and >= 1, got {self.m}")


def _check_binary(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask)
    vals = np.unique(mask)
    if not np.all(np.isin(vals, (0, 1))):
        raise ValueError(f"mask must be binary, found values {vals[:5]}")
    return mask.astype(np.float64)


def _window_counts(mask: np.ndarray, m: int) -> np.ndarray:
    """Number of ones in each m×m neighborhood (zero-padded)."""
    r = m // 2
    padded = np.pad(mask, r)
    s = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1))
    s[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    h, w = mask.shape
    r0 = np.arange(h)
    c0 = np.arange(w)
    r1, c1 = r0 + m, c0 + m
    return (s[r1[:, None], c1[None, :]] - s[r1[:, None], c0[None, :]]
            - s[r0[:, None], c1[None, :]] + s[r0[:, None], c0[None, :]])


def morph(mask: np.ndarray, m: int, mode: str) -> np.ndarray:
    """Dilate or erode a binary H×W (or 1×H×W) mask with an m×m ones element."""
    if m < 1 or m % 2 == 0:
        raise ValueError(f"m must be odd and >= 1, got {m}")
    squeeze = False
    arr = np.asarray(mask)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
        squeeze = True
    binary = _check_binary(arr)
    counts = _window_counts(binary, m)
    if mode == "dilate":
        out = (counts > 0.5).astype(np.float64)
    elif mode == "erode":
        out = (counts > m * m - 0.5).astype(np.float64)
    else:
        raise ValueError(f"mode must be 'dilate' or 'erode', got {mode!r}")
    return out[None] if squeeze else out


def contour_from_saliency(saliency: np.ndarray, cfg: MorphConfig = MorphConfig()) -> np.ndarray:
    """Contour target: dilation minus erosion of the saliency mask."""
    return morph(saliency, cfg.m, "dilate") - morph(saliency, cfg.m, "erode")
