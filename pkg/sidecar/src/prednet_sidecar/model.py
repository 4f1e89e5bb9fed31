"""NumPy inference for the stacked predictive-coding frame predictor.

The architecture is the standard four-level error-propagation stack:
each level l holds a representation R_l (a convolutional LSTM), a local
prediction Ahat_l, a target A_l, and a split rectified error E_l. One
timestep runs a top-down pass updating every R_l from (E_l(t-1),
R_l(t-1), upsampled R_{l+1}(t)), then a bottom-up pass computing Ahat_l,
E_l, and the next level's target A_{l+1} = maxpool(relu(conv(E_l))).
Level 0's prediction is the output frame, saturated at `pixel_max`.

Extrapolation: after the observed frames are consumed, the previous
level-0 prediction is fed back as the next input, and each of those
closed-loop predictions is emitted. This is the feedback convention the
published checkpoints were exported with (`extrap_start_time`); see the
weight-loading notes in the README for the expected file layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GATES = ("a", "ahat", "c", "f", "i", "o")  # canonical storage order


class ModelError(Exception):
    """Invalid model configuration or input."""


class WeightsError(Exception):
    """Weights file missing, unreadable, or mismatching the architecture."""


@dataclass(frozen=True)
class PredNetParams:
    stack_sizes: tuple[int, ...] = (1, 48, 96, 192)
    r_stack_sizes: tuple[int, ...] = (1, 48, 96, 192)
    a_filt_sizes: tuple[int, ...] = (3, 3, 3)
    ahat_filt_sizes: tuple[int, ...] = (3, 3, 3, 3)
    r_filt_sizes: tuple[int, ...] = (3, 3, 3, 3)
    pixel_max: float = 1.0

    def __post_init__(self):
        n = len(self.stack_sizes)
        if len(self.r_stack_sizes) != n:
            raise ModelError("r_stack_sizes length must match stack_sizes")
        if len(self.a_filt_sizes) != n - 1:
            raise ModelError("a_filt_sizes must have one entry per level "
                             "transition (len(stack_sizes) - 1)")
        if len(self.ahat_filt_sizes) != n or len(self.r_filt_sizes) != n:
            raise ModelError("ahat/r filter size lists must match stack_sizes")

    @property
    def levels(self) -> int:
        return len(self.stack_sizes)

    def lstm_input_channels(self, level: int) -> int:
        """Channels feeding level `level`'s ConvLSTM gates."""
        ch = 2 * self.stack_sizes[level] + self.r_stack_sizes[level]
        if level < self.levels - 1:
            ch += self.r_stack_sizes[level + 1]
        return ch

    def expected_weight_shapes(self) -> list[tuple[str, int, str, tuple]]:
        """(gate, level, part, shape) in canonical storage order."""
        spec = []
        for gate in GATES:
            if gate == "a":
                levels = range(self.levels - 1)
            else:
                levels = range(self.levels)
            for l in levels:
                if gate == "a":
                    k, cin, cout = (self.a_filt_sizes[l],
                                    2 * self.stack_sizes[l],
                                    self.stack_sizes[l + 1])
                elif gate == "ahat":
                    k, cin, cout = (self.ahat_filt_sizes[l],
                                    self.r_stack_sizes[l],
                                    self.stack_sizes[l])
                else:
                    k, cin, cout = (self.r_filt_sizes[l],
                                    self.lstm_input_channels(l),
                                    self.r_stack_sizes[l])
                spec.append((gate, l, "kernel", (k, k, cin, cout)))
                spec.append((gate, l, "bias", (cout,)))
        return spec


def params_for_variant(variant: str) -> PredNetParams:
    if variant == "gray":
        return PredNetParams(stack_sizes=(1, 48, 96, 192),
                             r_stack_sizes=(1, 48, 96, 192))
    if variant == "color":
        return PredNetParams(stack_sizes=(3, 48, 96, 192),
                             r_stack_sizes=(3, 48, 96, 192))
    raise ModelError(f"unknown variant {variant!r}")


def hard_sigmoid(x: np.ndarray) -> np.ndarray:
    return np.clip(0.2 * x + 0.5, 0.0, 1.0)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def conv2d_same(x: np.ndarray, kernel: np.ndarray,
                bias: np.ndarray) -> np.ndarray:
    """'same'-padded cross-correlation: x (h, w, cin) -> (h, w, cout)."""
    kh, kw, cin, _ = kernel.shape
    if x.shape[2] != cin:
        raise ModelError(f"conv input has {x.shape[2]} channels, "
                         f"kernel expects {cin}")
    xp = np.pad(x, ((kh // 2, kh // 2), (kw // 2, kw // 2), (0, 0)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw),
                                                       axis=(0, 1))
    return np.einsum("hwcij,ijcd->hwd", windows, kernel,
                     optimize=True) + bias


def maxpool2(x: np.ndarray) -> np.ndarray:
    h, w, c = x.shape
    return x[:h - h % 2, :w - w % 2].reshape(h // 2, 2, w // 2, 2, c) \
        .max(axis=(1, 3))


def upsample2(x: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(x, 2, axis=0), 2, axis=1)


class PredNet:
    """Inference-only network over a loaded weight dictionary.

    `weights` maps (gate, level) -> (kernel, bias) with gate in GATES.
    """

    def __init__(self, params: PredNetParams,
                 weights: dict[tuple[str, int], tuple[np.ndarray, np.ndarray]]):
        self.params = params
        for gate, level, part, shape in params.expected_weight_shapes():
            if part != "kernel":
                continue
            if (gate, level) not in weights:
                raise WeightsError(f"missing weights for {gate}[{level}]")
            kernel, bias = weights[(gate, level)]
            if kernel.shape != shape or bias.shape != (shape[3],):
                raise WeightsError(
                    f"{gate}[{level}] has shape {kernel.shape}/{bias.shape}, "
                    f"expected {shape}/({shape[3]},)")
        self.weights = weights

    def _conv(self, gate: str, level: int, x: np.ndarray) -> np.ndarray:
        kernel, bias = self.weights[(gate, level)]
        return conv2d_same(x, kernel, bias)

    def predict(self, frames: np.ndarray, extension: int) -> np.ndarray:
        """Run the observed (n, h, w, c) float sequence in [0, 1], then
        emit `extension` closed-loop predicted frames of the same shape.
        """
        p = self.params
        n, h, w, c = frames.shape
        if c != p.stack_sizes[0]:
            raise ModelError(f"input has {c} channels, model expects "
                             f"{p.stack_sizes[0]}")
        div = 2 ** (p.levels - 1)
        if h % div or w % div:
            raise ModelError(f"input dimensions must be divisible by {div}, "
                             f"got {w}x{h}")

        dims = [(h >> l, w >> l) for l in range(p.levels)]
        R = [np.zeros(d + (p.r_stack_sizes[l],)) for l, d in enumerate(dims)]
        C = [np.zeros_like(r) for r in R]
        E = [np.zeros(d + (2 * p.stack_sizes[l],)) for l, d in enumerate(dims)]

        outputs = []
        prediction = frames[0]
        for t in range(n + extension):
            frame = frames[t] if t < n else prediction
            # top-down: update every representation
            for l in reversed(range(p.levels)):
                parts = [E[l], R[l]]
                if l < p.levels - 1:
                    parts.append(upsample2(R[l + 1]))
                x = np.concatenate(parts, axis=2)
                i = hard_sigmoid(self._conv("i", l, x))
                f = hard_sigmoid(self._conv("f", l, x))
                o = hard_sigmoid(self._conv("o", l, x))
                C[l] = f * C[l] + i * np.tanh(self._conv("c", l, x))
                R[l] = o * np.tanh(C[l])
            # bottom-up: predictions, errors, next-level targets
            a = frame
            for l in range(p.levels):
                ahat = relu(self._conv("ahat", l, R[l]))
                if l == 0:
                    ahat = np.minimum(ahat, p.pixel_max)
                    prediction = ahat
                E[l] = np.concatenate([relu(ahat - a), relu(a - ahat)],
                                      axis=2)
                if l < p.levels - 1:
                    a = maxpool2(relu(self._conv("a", l, E[l])))
            if t >= n:
                outputs.append(prediction)
        return np.stack(outputs) if outputs else \
            np.zeros((0, h, w, c))
