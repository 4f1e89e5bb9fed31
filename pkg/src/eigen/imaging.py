"""Raster images: grayscale conversion, PNG I/O, flow overlays, mosaic composition.

A Raster stores intensities in [0, 1] as a read-only (height, width, channels)
float array. All operations return new rasters; nothing mutates in place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import FormatError, IoError, OriginOutOfBounds

# ITU-R BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])

DOT_RADIUS = 2
DOT_COLOR = (1.0, 1.0, 0.0)  # yellow, per the overlay convention
LINE_COLOR = (1.0, 1.0, 0.0)


@dataclass(frozen=True)
class Raster:
    """Image of unit-interval intensities, shape (height, width, channels)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float64)
        if p.ndim == 2:
            p = p[:, :, None]
        if p.ndim != 3 or p.shape[2] not in (1, 3):
            raise ValueError(f"expected (h, w, 1|3) array, got shape {p.shape}")
        if p.size and (p.min() < 0.0 or p.max() > 1.0):
            raise ValueError("intensities must lie in [0, 1]")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "pixels", p)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


def to_grayscale(img: Raster) -> Raster:
    """Collapse an RGB raster to 1 channel with BT.601 weights; identity on gray."""
    if img.channels == 1:
        return img
    gray = img.pixels @ _LUMA
    return Raster(np.clip(gray, 0.0, 1.0))


def to_rgb(img: Raster) -> Raster:
    """Replicate a gray raster to 3 channels; identity on RGB."""
    if img.channels == 3:
        return img
    return Raster(np.repeat(img.pixels, 3, axis=2))


def render_overlay(base: Raster, field, scale: float = 60.0) -> Raster:
    """Draw the vector field on a copy of `base`: a yellow dot at each origin
    and a segment to origin + scale * displacement, clipped to bounds.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    out = to_rgb(base).pixels.copy()
    h, w = out.shape[:2]
    for v in field.vectors:
        x0, y0 = v.origin
        if not (0 <= x0 < w and 0 <= y0 < h):
            raise OriginOutOfBounds(f"origin ({x0}, {y0}) outside {w}x{h} raster")
    for v in field.vectors:
        x0, y0 = v.origin
        x1 = x0 + scale * v.displacement[0]
        y1 = y0 + scale * v.displacement[1]
        _draw_segment(out, x0, y0, x1, y1)
        _draw_dot(out, x0, y0)
    return Raster(out)


def _draw_dot(pixels: np.ndarray, cx: float, cy: float) -> None:
    h, w = pixels.shape[:2]
    r = DOT_RADIUS
    for y in range(max(0, int(cy) - r), min(h, int(cy) + r + 1)):
        for x in range(max(0, int(cx) - r), min(w, int(cx) + r + 1)):
            if (x - cx) ** 2 + (y - cy) ** 2 <= r * r:
                pixels[y, x] = DOT_COLOR


def _draw_segment(pixels: np.ndarray, x0: float, y0: float, x1: float, y1: float) -> None:
    # dense sampling at sub-pixel steps gives a 1 px line without a Bresenham case split
    h, w = pixels.shape[:2]
    length = math.hypot(x1 - x0, y1 - y0)
    steps = max(1, int(math.ceil(length * 2)))
    for i in range(steps + 1):
        t = i / steps
        x = int(round(x0 + t * (x1 - x0)))
        y = int(round(y0 + t * (y1 - y0)))
        # clip: pixels beyond the border are dropped, the in-bounds part stays
        if 0 <= x < w and 0 <= y < h:
            pixels[y, x] = LINE_COLOR


def compose_mirrored(tile: Raster, rows: int, cols: int, alternate_mirror: bool = True) -> Raster:
    """Tile `tile` rows x cols; with alternate_mirror, odd columns are flipped
    horizontally and odd rows vertically, so edges meet seamlessly.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    blocks = []
    for r in range(rows):
        row_blocks = []
        for c in range(cols):
            t = tile.pixels
            if alternate_mirror:
                if c % 2 == 1:
                    t = t[:, ::-1, :]
                if r % 2 == 1:
                    t = t[::-1, :, :]
            row_blocks.append(t)
        blocks.append(np.concatenate(row_blocks, axis=1))
    return Raster(np.concatenate(blocks, axis=0))


def save_png(img: Raster, path) -> None:
    """Write an 8-bit PNG (grayscale or RGB, no alpha)."""
    data = np.round(img.pixels * 255.0).astype(np.uint8)
    if img.channels == 1:
        pil = Image.fromarray(data[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(data, mode="RGB")
    try:
        pil.save(path, format="PNG")
    except OSError as e:
        raise IoError(str(e)) from e


def load_png(path) -> Raster:
    """Read a PNG into a Raster; raises FormatError on anything undecodable."""
    try:
        with Image.open(path) as pil:
            if pil.format != "PNG":
                raise FormatError(f"{path}: not a PNG file")
            if pil.mode not in ("L", "RGB"):
                pil = pil.convert("RGB")
            data = np.asarray(pil)
    except UnidentifiedImageError as e:
        raise FormatError(f"{path}: not a decodable image") from e
    except FileNotFoundError as e:
        raise IoError(str(e)) from e
    except OSError as e:
        # Pillow raises OSError for truncated image data
        raise FormatError(f"{path}: {e}") from e
    return Raster(data.astype(np.float64) / 255.0)
