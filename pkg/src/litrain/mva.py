"""Multi-view composite construction: downsample, rotate, stitch.

The composite is [original | downsampled | rotated] side by side, top-aligned,
on a pad-colored canvas. Rotation expands the canvas to the rotated bounding
box instead of cropping — the whole point of the extra views is to keep
fine-grained content visible, so nothing may fall off the edge.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UsageError

RGB = tuple[int, int, int]
WHITE: RGB = (255, 255, 255)


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Row-major RGB image; pixels is an (H, W, 3) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if not (isinstance(p, np.ndarray) and p.ndim == 3 and p.shape[2] == 3):
            raise UsageError("pixels must be an (H, W, 3) array")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise UsageError("image must be at least 1x1")
        if p.dtype != np.uint8:
            raise UsageError(f"pixels must be uint8, got {p.dtype}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def same_pixels(self, other: "RasterImage") -> bool:
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True)
class MvaParams:
    angle: float | None = None  # None → drawn from the seeded RNG
    downsample_factor: float = 0.5
    pad_color: RGB = WHITE
    seed: int = 0

    def __post_init__(self):
        if self.angle is not None and not -180.0 <= self.angle <= 180.0:
            raise UsageError(f"angle must lie in [-180, 180], got {self.angle}")
        if not 0.0 < self.downsample_factor <= 1.0:
            raise UsageError(f"downsample factor must lie in (0, 1], got {self.downsample_factor}")


def draw_angle(seed: int) -> float:
    return random.Random(seed).uniform(-180.0, 180.0)


def _scaled_dim(dim: int, factor: float) -> int:
    # round-half-up, independent of the platform's float rounding mode
    return max(1, math.floor(factor * dim + 0.5))


def _bilinear_sample(pixels: np.ndarray, src_r: np.ndarray, src_c: np.ndarray) -> np.ndarray:
    """Sample (H,W,3) uint8 pixels at fractional (row, col) coordinates."""
    h, w = pixels.shape[:2]
    r0 = np.clip(np.floor(src_r).astype(int), 0, h - 1)
    c0 = np.clip(np.floor(src_c).astype(int), 0, w - 1)
    r1 = np.clip(r0 + 1, 0, h - 1)
    c1 = np.clip(c0 + 1, 0, w - 1)
    fr = np.clip(src_r - r0, 0.0, 1.0)[..., None]
    fc = np.clip(src_c - c0, 0.0, 1.0)[..., None]
    top = pixels[r0, c0].astype(np.float64) * (1 - fc) + pixels[r0, c1].astype(np.float64) * fc
    bot = pixels[r1, c0].astype(np.float64) * (1 - fc) + pixels[r1, c1].astype(np.float64) * fc
    out = top * (1 - fr) + bot * fr
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def downsample(img: RasterImage, factor: float) -> RasterImage:
    """Bilinear resize by a factor in (0, 1]; dims round half-up, floor 1px."""
    if not 0.0 < factor <= 1.0:
        raise UsageError(f"downsample factor must lie in (0, 1], got {factor}")
    if factor == 1.0:
        return RasterImage(pixels=img.pixels.copy())
    out_h = _scaled_dim(img.height, factor)
    out_w = _scaled_dim(img.width, factor)
    # half-pixel-center mapping: output centers land proportionally in input
    rows = (np.arange(out_h) + 0.5) * (img.height / out_h) - 0.5
    cols = (np.arange(out_w) + 0.5) * (img.width / out_w) - 0.5
    src_r = np.clip(rows, 0, img.height - 1)[:, None] * np.ones((1, out_w))
    src_c = np.ones((out_h, 1)) * np.clip(cols, 0, img.width - 1)[None, :]
    return RasterImage(pixels=_bilinear_sample(img.pixels, src_r, src_c))


def rotate(img: RasterImage, angle: float, pad: RGB = WHITE) -> RasterImage:
    """Rotate counter-clockwise by `angle` degrees onto an expanded canvas.

    Multiples of 90 are lossless axis swaps; everything else is inverse-mapped
    bilinear with pad-colored corners.
    """
    if not -180.0 <= angle <= 180.0:
        raise UsageError(f"angle must lie in [-180, 180], got {angle}")
    if angle % 90 == 0:
        k = int(angle // 90) % 4
        return RasterImage(pixels=np.ascontiguousarray(np.rot90(img.pixels, k)))
    theta = math.radians(angle)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    h, w = img.height, img.width
    out_w = math.ceil(w * abs(cos_t) + h * abs(sin_t))
    out_h = math.ceil(w * abs(sin_t) + h * abs(cos_t))
    cy_o, cx_o = (out_h - 1) / 2.0, (out_w - 1) / 2.0
    cy_i, cx_i = (h - 1) / 2.0, (w - 1) / 2.0
    rr, cc = np.meshgrid(np.arange(out_h, dtype=np.float64),
                         np.arange(out_w, dtype=np.float64), indexing="ij")
    x_o = cc - cx_o
    y_o = rr - cy_o
    # screen-CCW forward rotation inverted; y points down so signs flip vs math convention
    src_c = x_o * cos_t - y_o * sin_t + cx_i
    src_r = x_o * sin_t + y_o * cos_t + cy_i
    eps = 1e-9
    valid = (src_c >= -eps) & (src_c <= w - 1 + eps) & (src_r >= -eps) & (src_r <= h - 1 + eps)
    sampled = _bilinear_sample(img.pixels, np.clip(src_r, 0, h - 1), np.clip(src_c, 0, w - 1))
    out = np.empty((out_h, out_w, 3), dtype=np.uint8)
    out[:] = np.array(pad, dtype=np.uint8)
    out[valid] = sampled[valid]
    return RasterImage(pixels=out)


def hstack(imgs: Sequence[RasterImage], pad: RGB = WHITE) -> RasterImage:
    """Concatenate left to right, top-aligned; shorter panels bottom-padded."""
    if len(imgs) == 0:
        raise UsageError("hstack needs at least one image")
    out_h = max(im.height for im in imgs)
    out_w = sum(im.width for im in imgs)
    out = np.empty((out_h, out_w, 3), dtype=np.uint8)
    out[:] = np.array(pad, dtype=np.uint8)
    x = 0
    for im in imgs:
        out[: im.height, x : x + im.width] = im.pixels
        x += im.width
    return RasterImage(pixels=out)


def build_composite(img: RasterImage, params: MvaParams) -> RasterImage:
    """[original | downsampled | rotated], sharing one pad color."""
    angle = params.angle if params.angle is not None else draw_angle(params.seed)
    panels = [
        img,
        downsample(img, params.downsample_factor),
        rotate(img, angle, params.pad_color),
    ]
    return hstack(panels, params.pad_color)


def load_png(path: str) -> RasterImage:
    from PIL import Image

    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return RasterImage(pixels=arr)


def save_png(img: RasterImage, path: str) -> None:
    from PIL import Image

    Image.fromarray(img.pixels, mode="RGB").save(path, format="PNG")
