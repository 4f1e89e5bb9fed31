"""Frame predictors: turn a static image into a 20-frame sequence and obtain
predicted extension frames.

Built-in predictors are deterministic stand-ins (identity, known-shift,
luminance-gradient drift); the external predictor speaks the wire protocol to
a child process holding an actual model.
"""

from __future__ import annotations

import shlex
import subprocess
from dataclasses import dataclass

import cv2
import numpy as np

from . import protocol
from .errors import DimensionMismatch, ProtocolError, SidecarError, SpawnError
from .imaging import Raster, to_grayscale


@dataclass(frozen=True)
class PredictRequest:
    frames: tuple[Raster, ...]
    extension: int = 2

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.frames:
            raise ValueError("request needs at least one frame")
        if self.extension < 1:
            raise ValueError("extension must be >= 1")
        f0 = self.frames[0]
        for f in self.frames:
            if (f.width, f.height, f.channels) != (f0.width, f0.height, f0.channels):
                raise ValueError("frames must share dimensions and channels")


@dataclass(frozen=True)
class PredictResponse:
    predicted: tuple[Raster, ...]


def make_static_sequence(img: Raster, n: int = 20, extension: int = 2) -> PredictRequest:
    """Repeat one image n times: the static 'video' the predictor extrapolates."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return PredictRequest((img,) * n, extension)


def predict_identity(req: PredictRequest) -> PredictResponse:
    """The perfect predictor for a static sequence: copies of the last frame."""
    return PredictResponse((req.frames[-1],) * req.extension)


def _bilinear_shift(img: Raster, dx: float, dy: float) -> Raster:
    """Translate content by (dx, dy); bilinear sampling, replicated borders."""
    h, w = img.height, img.width
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    sx = xs - dx
    sy = ys - dy
    x0 = np.clip(np.floor(sx).astype(int), 0, w - 1)
    y0 = np.clip(np.floor(sy).astype(int), 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    fx = np.clip(sx - np.floor(sx), 0.0, 1.0)
    fy = np.clip(sy - np.floor(sy), 0.0, 1.0)
    # clamp the sample position itself so borders replicate
    fx = np.where(sx < 0, 0.0, np.where(sx > w - 1, 1.0, fx))
    fy = np.where(sy < 0, 0.0, np.where(sy > h - 1, 1.0, fy))
    p = img.pixels
    out = ((1 - fx)[:, :, None] * (1 - fy)[:, :, None] * p[y0, x0]
           + fx[:, :, None] * (1 - fy)[:, :, None] * p[y0, x1]
           + (1 - fx)[:, :, None] * fy[:, :, None] * p[y1, x0]
           + fx[:, :, None] * fy[:, :, None] * p[y1, x1])
    return Raster(np.clip(out, 0.0, 1.0))


def predict_shift(req: PredictRequest, dx: float, dy: float) -> PredictResponse:
    """Ground-truth-motion oracle: frame k is the last input shifted by (k+1)*(dx,dy)."""
    last = req.frames[-1]
    return PredictResponse(tuple(
        _bilinear_shift(last, (k + 1) * dx, (k + 1) * dy)
        for k in range(req.extension)))


def predict_gradient_drift(req: PredictRequest, gain: float = 1.0) -> PredictResponse:
    """Stand-in evaluator: displaces content along the smoothed luminance
    gradient, mimicking the gradient-following motion the trained model shows.
    Displacement is gain * grad(I), capped at 1 px per frame, applied
    cumulatively for each extension frame.
    """
    if gain < 0:
        raise ValueError("gain must be >= 0")
    frame = req.frames[-1]
    out = []
    for _ in range(req.extension):
        frame = _drift_once(frame, gain)
        out.append(frame)
    return PredictResponse(tuple(out))


def _drift_once(frame: Raster, gain: float) -> Raster:
    lum = to_grayscale(frame).pixels[:, :, 0]
    # Sobel responses divided by 8 estimate intensity change per pixel
    gx = cv2.Sobel(lum, cv2.CV_64F, 1, 0, ksize=3, borderType=cv2.BORDER_REPLICATE) / 8.0
    gy = cv2.Sobel(lum, cv2.CV_64F, 0, 1, ksize=3, borderType=cv2.BORDER_REPLICATE) / 8.0
    gx = cv2.blur(gx, (5, 5), borderType=cv2.BORDER_REPLICATE)
    gy = cv2.blur(gy, (5, 5), borderType=cv2.BORDER_REPLICATE)
    dx = gain * gx
    dy = gain * gy
    mag = np.hypot(dx, dy)
    scale = np.where(mag > 1.0, 1.0 / np.maximum(mag, 1e-12), 1.0)
    dx *= scale
    dy *= scale
    h, w = frame.height, frame.width
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float32)
    warped = cv2.remap(frame.pixels, (xs - dx).astype(np.float32),
                       (ys - dy).astype(np.float32),
                       interpolation=cv2.INTER_LINEAR,
                       borderMode=cv2.BORDER_REPLICATE)
    if warped.ndim == 2:
        warped = warped[:, :, None]
    return Raster(np.clip(warped, 0.0, 1.0))


class ExternalPredictor:
    """Client for a sidecar process speaking the wire protocol on stdio.

    One request is in flight at a time; the child keeps model state across
    requests. Use as a context manager or call close().
    """

    def __init__(self, command: str):
        self.command = command
        try:
            self._proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as e:
            raise SpawnError(f"cannot spawn {command!r}: {e}") from e

    def predict(self, req: PredictRequest) -> PredictResponse:
        payload = protocol.encode(protocol.MSG_REQUEST, req.frames,
                                  extension=req.extension)
        try:
            self._proc.stdin.write(payload)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise ProtocolError(f"sidecar pipe closed: {e}") from e
        msg = protocol.read_message(self._proc.stdout)
        if msg.msg_type == protocol.MSG_ERROR:
            raise SidecarError(msg.error_text)
        if msg.msg_type != protocol.MSG_RESPONSE:
            raise ProtocolError(f"expected response, got type {msg.msg_type}")
        f0 = req.frames[0]
        for f in msg.frames:
            if (f.width, f.height, f.channels) != (f0.width, f0.height, f0.channels):
                raise DimensionMismatch(
                    f"sidecar returned {f.width}x{f.height}x{f.channels}, "
                    f"expected {f0.width}x{f0.height}x{f0.channels}")
        return PredictResponse(msg.frames)

    def close(self):
        if self._proc.stdin and not self._proc.stdin.closed:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def predict_external(req: PredictRequest, command: str) -> PredictResponse:
    """One-shot round trip: spawn the sidecar, send req, read the response."""
    with ExternalPredictor(command) as client:
        return client.predict(req)
