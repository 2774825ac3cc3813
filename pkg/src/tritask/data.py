"""Samples, dataset layout, augmentation and synthetic scene generation.

A sample couples an RGB image with depth, saliency and contour targets at a
shared resolution.  The contour target is always derived from the saliency
mask (dilation minus erosion), never stored on disk.  Depth follows the
nearer-is-larger convention, min-max normalized per image over valid pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .imageio import load_image, save_image
from .morphology import MorphConfig, contour_from_saliency


@dataclass
class Sample:
    """One training/evaluation item; all maps share H×W.

    ``depth`` and ``valid`` may be None for saliency-only evaluation data.
    """

    rgb: np.ndarray                 # (3, H, W) in [0, 1]
    depth: np.ndarray | None        # (1, H, W) in [0, 1], nearer = larger
    saliency: np.ndarray            # (1, H, W) binary
    contour: np.ndarray             # (1, H, W) binary, derived from saliency
    valid: np.ndarray | None        # (1, H, W) binary depth-validity mask
    name: str = ""

    @property
    def hw(self) -> tuple[int, int]:
        return self.rgb.shape[1], self.rgb.shape[2]

    def validate(self, morph_cfg: MorphConfig = MorphConfig()) -> None:
        h, w = self.hw
        maps = {"saliency": self.saliency, "contour": self.contour}
        if self.depth is not None:
            maps["depth"] = self.depth
        if self.valid is not None:
            maps["valid"] = self.valid
        for key, arr in maps.items():
            if arr.shape != (1, h, w):
                raise ValueError(f"{self.name}: {key} shape {arr.shape} != (1, {h}, {w})")
        for key in ("saliency", "contour", "valid"):
            arr = getattr(self, key if key != "valid" else "valid")
            if arr is None:
                continue
            if not np.all(np.isin(np.unique(arr), (0.0, 1.0))):
                raise ValueError(f"{self.name}: {key} is not binary")
        expected = contour_from_saliency(self.saliency[0], morph_cfg)
        if not np.array_equal(self.contour[0], expected):
            raise ValueError(f"{self.name}: contour does not equal dilate-erode of saliency")


@dataclass(frozen=True)
class AugmentConfig:
    flip_prob: float = 0.5
    max_rotate_deg: float = 15.0
    max_border_crop_frac: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError("flip_prob must lie in [0, 1]")
        if not 0.0 <= self.max_border_crop_frac < 0.5:
            raise ValueError("max_border_crop_frac must lie in [0, 0.5)")


# -- resampling helpers (plain numpy, the non-differentiable data path) ------


def _nearest_axis(n_in: int, n_out: int) -> np.ndarray:
    return np.minimum((np.arange(n_out) + 0.5) * (n_in / n_out), n_in - 1).astype(np.intp)


def resize_nearest(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    c, h, w = img.shape
    return img[:, _nearest_axis(h, out_h)[:, None], _nearest_axis(w, out_w)[None, :]]


def resize_bilinear_np(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    c, h, w = img.shape
    yy = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    xx = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    y0 = np.floor(yy).astype(np.intp)
    x0 = np.floor(xx).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (yy - y0)[None, :, None]
    fx = (xx - x0)[None, None, :]
    top = img[:, y0][:, :, x0] * (1 - fx) + img[:, y0][:, :, x1] * fx
    bot = img[:, y1][:, :, x0] * (1 - fx) + img[:, y1][:, :, x1] * fx
    return top * (1 - fy) + bot * fy


def _rotate(img: np.ndarray, degrees: float, nearest: bool) -> np.ndarray:
    """Rotate about the image center, zero-filled outside the frame."""
    c, h, w = img.shape
    theta = math.radians(degrees)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ys, xs = np.meshgrid(np.arange(h) - cy, np.arange(w) - cx, indexing="ij")
    src_y = cos_t * ys + sin_t * xs + cy
    src_x = -sin_t * ys + cos_t * xs + cx
    inside = (src_y >= 0) & (src_y <= h - 1) & (src_x >= 0) & (src_x <= w - 1)
    out = np.zeros_like(img)
    if nearest:
        iy = np.clip(np.rint(src_y), 0, h - 1).astype(np.intp)
        ix = np.clip(np.rint(src_x), 0, w - 1).astype(np.intp)
        out[:] = img[:, iy, ix]
    else:
        y0 = np.clip(np.floor(src_y), 0, h - 1).astype(np.intp)
        x0 = np.clip(np.floor(src_x), 0, w - 1).astype(np.intp)
        y1 = np.minimum(y0 + 1, h - 1)
        x1 = np.minimum(x0 + 1, w - 1)
        fy = np.clip(src_y, 0, h - 1) - y0
        fx = np.clip(src_x, 0, w - 1) - x0
        top = img[:, y0, x0] * (1 - fx) + img[:, y0, x1] * fx
        bot = img[:, y1, x0] * (1 - fx) + img[:, y1, x1] * fx
        out[:] = top * (1 - fy) + bot * fy
    out *= inside
    return out


def augment(sample: Sample, cfg: AugmentConfig, rng: np.random.Generator) -> Sample:
    """Apply one random flip/rotate/border-crop draw to every map jointly.

    RGB and depth are resampled bilinearly, masks with nearest neighbour;
    the contour target is recomputed from the transformed saliency mask.
    Regions rotated in from outside the frame are marked depth-invalid.
    """
    if sample.depth is None or sample.valid is None:
        raise ValueError("augment requires samples with depth")
    rgb, depth, sal, valid = sample.rgb, sample.depth, sample.saliency, sample.valid
    h, w = sample.hw

    if rng.random() < cfg.flip_prob:
        rgb, depth, sal, valid = (a[:, :, ::-1].copy() for a in (rgb, depth, sal, valid))

    degrees = rng.uniform(-cfg.max_rotate_deg, cfg.max_rotate_deg)
    if abs(degrees) > 1e-12:
        rgb = _rotate(rgb, degrees, nearest=False)
        depth = _rotate(depth, degrees, nearest=False)
        sal = _rotate(sal, degrees, nearest=True)
        frame = _rotate(np.ones((1, h, w)), degrees, nearest=True)
        valid = _rotate(valid, degrees, nearest=True) * frame

    if cfg.max_border_crop_frac > 0:
        t, b, l, r = (int(rng.uniform(0, cfg.max_border_crop_frac) * side)
                      for side in (h, h, w, w))
        if t + b > 0 or l + r > 0:
            sl = (slice(None), slice(t, h - b), slice(l, w - r))
            rgb = resize_bilinear_np(rgb[sl], h, w)
            depth = resize_bilinear_np(depth[sl], h, w)
            sal = resize_nearest(sal[sl], h, w)
            valid = resize_nearest(valid[sl], h, w)

    contour = contour_from_saliency(sal[0])[None]
    return replace(sample, rgb=np.clip(rgb, 0.0, 1.0), depth=np.clip(depth, 0.0, 1.0),
                   saliency=sal, contour=contour, valid=valid)


def resize_sample(sample: Sample, size: int) -> Sample:
    """Resize every map to size×size; size must be divisible by 32."""
    if size < 32 or size % 32 != 0:
        raise ValueError(f"target size must be >= 32 and divisible by 32, got {size}")
    if sample.hw == (size, size):
        return sample
    sal = resize_nearest(sample.saliency, size, size)
    return replace(
        sample,
        rgb=resize_bilinear_np(sample.rgb, size, size),
        depth=None if sample.depth is None else resize_bilinear_np(sample.depth, size, size),
        saliency=sal,
        contour=contour_from_saliency(sal[0])[None],
        valid=None if sample.valid is None else resize_nearest(sample.valid, size, size),
    )


# -- synthetic scenes ---------------------------------------------------------


def _linear_field(h: int, w: int, rng: np.random.Generator, lo: float, hi: float) -> np.ndarray:
    """Smooth planar ramp across the frame in a random direction."""
    angle = rng.uniform(0, 2 * math.pi)
    ys, xs = np.meshgrid(np.linspace(-1, 1, h), np.linspace(-1, 1, w), indexing="ij")
    ramp = math.cos(angle) * ys + math.sin(angle) * xs
    ramp = (ramp - ramp.min()) / max(ramp.max() - ramp.min(), 1e-9)
    return lo + (hi - lo) * ramp


def generate_synthetic(seed: int, h: int = 352, w: int = 352, n_shapes: int = 4) -> Sample:
    """Layered random rectangles and disks over a smooth background.

    Nearer shapes carry larger depth values and occlude farther ones; the
    nearest half of the shapes is designated salient.  Deterministic per seed.
    """
    if n_shapes < 1:
        raise ValueError("n_shapes must be >= 1")
    rng = np.random.default_rng(seed)
    depth = _linear_field(h, w, rng, 0.05, 0.25)[None]
    rgb = np.stack([_linear_field(h, w, rng, 0.1, 0.5) for _ in range(3)])
    top = np.full((h, w), -1, dtype=np.intp)

    ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    layer_depths = np.linspace(0.4, 0.95, n_shapes)
    for idx in range(n_shapes):  # far to near, nearer shapes drawn over
        is_disk = rng.random() < 0.5
        color = rng.uniform(0.1, 1.0, size=3)
        if is_disk:
            radius = rng.uniform(0.08, 0.2) * min(h, w)
            cy = rng.uniform(radius + 1, h - radius - 1)
            cx = rng.uniform(radius + 1, w - radius - 1)
            mask = (ys - cy) ** 2 + (xs - cx) ** 2 <= radius ** 2
        else:
            hh = rng.uniform(0.06, 0.18) * h
            hw_ = rng.uniform(0.06, 0.18) * w
            cy = rng.uniform(hh + 1, h - hh - 1)
            cx = rng.uniform(hw_ + 1, w - hw_ - 1)
            mask = (np.abs(ys - cy) <= hh) & (np.abs(xs - cx) <= hw_)
        rgb[:, mask] = color[:, None]
        depth[0, mask] = layer_depths[idx]
        top[mask] = idx

    rgb += rng.normal(0.0, 0.02, size=rgb.shape)
    rgb = np.clip(rgb, 0.0, 1.0)
    salient_from = n_shapes - math.ceil(n_shapes / 2)
    saliency = (top >= salient_from).astype(np.float64)[None]
    return Sample(
        rgb=rgb,
        depth=depth,
        saliency=saliency,
        contour=contour_from_saliency(saliency[0])[None],
        valid=np.ones((1, h, w)),
        name=f"synthetic-{seed}",
    )


def make_synthetic_set(base_seed: int, count: int, size: int = 352,
                       n_shapes: int = 4) -> list[Sample]:
    return [generate_synthetic(base_seed + i, size, size, n_shapes) for i in range(count)]


# -- dataset directory layout: rgb/*.ppm, depth/*.pgm, gt/*.pgm ---------------


def normalize_depth(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Min-max normalize depth over valid (> 0) pixels; invalid pixels go to 0."""
    valid = (raw > 0).astype(np.float64)
    depth = np.zeros_like(raw)
    vals = raw[valid > 0]
    if vals.size:
        lo, hi = vals.min(), vals.max()
        span = hi - lo
        depth[valid > 0] = (vals - lo) / span if span > 0 else 1.0
    return depth, valid


def save_sample(sample: Sample, root: Path | str, stem: str) -> None:
    root = Path(root)
    for sub in ("rgb", "depth", "gt"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    save_image(sample.rgb, root / "rgb" / f"{stem}.ppm")
    if sample.depth is not None:
        save_image(sample.depth, root / "depth" / f"{stem}.pgm")
    save_image(sample.saliency, root / "gt" / f"{stem}.pgm")


def load_sample(root: Path | str, stem: str, need_depth: bool = True) -> Sample:
    root = Path(root)
    rgb = load_image(root / "rgb" / f"{stem}.ppm")
    gt_path = root / "gt" / f"{stem}.pgm"
    if not gt_path.exists():
        raise FileNotFoundError(f"missing ground-truth mask {gt_path}")
    saliency = (load_image(gt_path) > 0.5).astype(np.float64)
    depth_path = root / "depth" / f"{stem}.pgm"
    depth = valid = None
    if depth_path.exists():
        depth, valid = normalize_depth(load_image(depth_path))
    elif need_depth:
        raise FileNotFoundError(f"missing depth map {depth_path}")
    return Sample(
        rgb=rgb,
        depth=depth,
        saliency=saliency,
        contour=contour_from_saliency(saliency[0])[None],
        valid=valid,
        name=stem,
    )


def list_stems(root: Path | str) -> list[str]:
    rgb_dir = Path(root) / "rgb"
    if not rgb_dir.is_dir():
        raise FileNotFoundError(f"dataset directory {rgb_dir} not found")
    return sorted(p.stem for p in rgb_dir.glob("*.ppm"))


def load_dataset(root: Path | str, need_depth: bool = True) -> list[Sample]:
    stems = list_stems(root)
    if not stems:
        raise FileNotFoundError(f"no rgb/*.ppm images under {root}")
    return [load_sample(root, stem, need_depth=need_depth) for stem in stems]
