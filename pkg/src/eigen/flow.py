"""Motion estimation between an input image and its prediction.

Shi-Tomasi corners on the input, pyramidal Lucas-Kanade tracking into the
prediction (OpenCV backends), yielding the vector field the fitness scores.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import cv2
import numpy as np

from .errors import DimensionMismatch
from .imaging import Raster, to_grayscale

TRACKED = "tracked"
LOST = "lost"


@dataclass(frozen=True)
class FlowVector:
    origin: tuple[float, float]       # subpixel position in the first image
    displacement: tuple[float, float]  # pixels per frame-step
    status: str = TRACKED

    @property
    def magnitude(self) -> float:
        return float(np.hypot(*self.displacement))


@dataclass(frozen=True)
class VectorField:
    vectors: tuple[FlowVector, ...]
    source_size: tuple[int, int]  # (width, height)

    def __post_init__(self):
        object.__setattr__(self, "vectors", tuple(self.vectors))
        w, h = self.source_size
        for v in self.vectors:
            if not (0 <= v.origin[0] < w and 0 <= v.origin[1] < h):
                raise ValueError(f"origin {v.origin} outside {w}x{h}")

    def tracked(self) -> tuple[FlowVector, ...]:
        return tuple(v for v in self.vectors if v.status == TRACKED)

    def to_json(self) -> str:
        return json.dumps({
            "source_size": list(self.source_size),
            "vectors": [
                {"x": v.origin[0], "y": v.origin[1],
                 "dx": v.displacement[0], "dy": v.displacement[1]}
                for v in self.vectors if v.status == TRACKED
            ],
        })


@dataclass(frozen=True)
class FlowParams:
    max_features: int = 200
    shi_tomasi_quality: float = 0.01
    min_feature_distance: float = 5.0
    window: int = 15
    pyramid_levels: int = 3
    max_iterations: int = 20
    epsilon: float = 0.01
    min_eigen_threshold: float = 1e-4

    def __post_init__(self):
        if self.window % 2 != 1:
            raise ValueError("window must be odd")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")


def _as_u8(img: Raster) -> np.ndarray:
    if img.channels != 1:
        raise ValueError("expected a 1-channel raster")
    return np.round(img.pixels[:, :, 0] * 255.0).astype(np.uint8)


def detect_features(img: Raster, p: FlowParams = FlowParams()) -> list[tuple[float, float]]:
    """Shi-Tomasi corners, non-max suppressed, strongest first."""
    gray = _as_u8(img)
    pts = cv2.goodFeaturesToTrack(
        gray,
        maxCorners=p.max_features,
        qualityLevel=p.shi_tomasi_quality,
        minDistance=p.min_feature_distance,
    )
    if pts is None:
        return []
    return [(float(x), float(y)) for x, y in pts.reshape(-1, 2)]


def track(prev: Raster, next_img: Raster, points, p: FlowParams = FlowParams()) -> VectorField:
    """Pyramidal LK from `points` in prev into next_img."""
    if (prev.width, prev.height) != (next_img.width, next_img.height):
        raise DimensionMismatch(
            f"{prev.width}x{prev.height} vs {next_img.width}x{next_img.height}")
    size = (prev.width, prev.height)
    if not points:
        return VectorField((), size)
    a = _as_u8(prev)
    b = _as_u8(next_img)
    pts = np.array(points, dtype=np.float32).reshape(-1, 1, 2)
    nxt, status, _err = cv2.calcOpticalFlowPyrLK(
        a, b, pts, None,
        winSize=(p.window, p.window),
        maxLevel=p.pyramid_levels - 1,
        criteria=(cv2.TERM_CRITERIA_EPS | cv2.TERM_CRITERIA_COUNT,
                  p.max_iterations, p.epsilon),
        minEigThreshold=p.min_eigen_threshold,
    )
    vectors = []
    for (x0, y0), (x1, y1), ok in zip(pts.reshape(-1, 2), nxt.reshape(-1, 2),
                                      status.reshape(-1)):
        in_frame = 0 <= x1 < size[0] and 0 <= y1 < size[1]
        st = TRACKED if (ok == 1 and in_frame) else LOST
        vectors.append(FlowVector((float(x0), float(y0)),
                                  (float(x1 - x0), float(y1 - y0)), st))
    return VectorField(tuple(vectors), size)


def flow_between(input_img: Raster, predicted: Raster,
                 p: FlowParams = FlowParams()) -> VectorField:
    """Features on the input, tracked into the prediction; tracked vectors only.

    Displacements point toward the model's predicted motion. Human-perceived
    illusory motion typically runs in the opposite sense; this function
    reports the model's sense.
    """
    if (input_img.width, input_img.height) != (predicted.width, predicted.height):
        raise DimensionMismatch(
            f"{input_img.width}x{input_img.height} vs {predicted.width}x{predicted.height}")
    a = to_grayscale(input_img)
    b = to_grayscale(predicted)
    pts = detect_features(a, p)
    field_all = track(a, b, pts, p)
    return VectorField(field_all.tracked(), field_all.source_size)
