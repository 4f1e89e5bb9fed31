"""`sidecar` command: serve frame predictions over stdio.

Usage:
    sidecar --echo
    sidecar --weights PATH [--variant gray|color]

The process reads type-1 request messages from stdin and answers each
with one type-2 response (or a type-3 error, after which it keeps
serving). It exits 0 at end-of-input and nonzero if the weights file
cannot be loaded.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import wire
from .model import ModelError, PredNet, WeightsError
from .weights import infer_params, load_weights

VARIANT_CHANNELS = {"gray": 1, "color": 3}


@dataclass(frozen=True)
class SidecarConfig:
    echo: bool = False
    weights_path: Path | None = None
    variant: str = "gray"

    def __post_init__(self):
        if self.variant not in VARIANT_CHANNELS:
            raise ModelError(f"unknown variant {self.variant!r}")
        if self.echo == (self.weights_path is not None):
            raise ModelError("exactly one of echo mode or a weights path "
                             "is required")


def _predict_echo(request: wire.Request) -> np.ndarray:
    """Self-test predictor: the last input frame, `extension` times."""
    last = request.frames[-1]
    return np.stack([last] * request.extension) if request.extension \
        else last[None][:0]


def _predict_model(model: PredNet, request: wire.Request) -> np.ndarray:
    frames = request.frames.astype(np.float64) / 255.0
    predicted = model.predict(frames, request.extension)
    return np.round(np.clip(predicted, 0.0, 1.0) * 255.0).astype(np.uint8)


def serve(stdin, stdout, cfg: SidecarConfig) -> int:
    """Answer requests until end-of-input. Returns the process exit code."""
    model = None
    if not cfg.echo:
        try:
            params = infer_params(cfg.weights_path)
            if params.stack_sizes[0] != VARIANT_CHANNELS[cfg.variant]:
                raise WeightsError(
                    f"weights are for a {params.stack_sizes[0]}-channel "
                    f"model, but variant '{cfg.variant}' expects "
                    f"{VARIANT_CHANNELS[cfg.variant]}")
            model = PredNet(params, load_weights(cfg.weights_path, params))
        except (WeightsError, ModelError) as exc:
            wire.write_error(stdout, str(exc))
            return 1

    while True:
        try:
            request = wire.read_request(stdin)
        except wire.WireError as exc:
            wire.write_error(stdout, str(exc))
            continue
        if request is None:
            return 0
        try:
            if cfg.echo:
                predicted = _predict_echo(request)
            else:
                expected = VARIANT_CHANNELS[cfg.variant]
                if request.channels != expected:
                    raise ModelError(
                        f"channel mismatch: request has {request.channels} "
                        f"channel(s) but the loaded '{cfg.variant}' variant "
                        f"expects {expected}")
                predicted = _predict_model(model, request)
            wire.write_response(stdout, predicted)
        except Exception as exc:  # keep serving after any one bad request
            wire.write_error(stdout, str(exc))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="sidecar",
        description="Serve frame predictions over the stdio wire protocol.")
    mode = parser.add_mutually_exclusive_group(required=True)
    mode.add_argument("--echo", action="store_true",
                      help="self-test mode: answer with the last input frame")
    mode.add_argument("--weights", type=Path,
                      help="path to an HDF5 weights file")
    parser.add_argument("--variant", choices=sorted(VARIANT_CHANNELS),
                        default="gray",
                        help="model variant the weights were trained for")
    args = parser.parse_args(argv)
    cfg = SidecarConfig(echo=args.echo, weights_path=args.weights,
                        variant=args.variant)
    return serve(sys.stdin.buffer, sys.stdout.buffer, cfg)


if __name__ == "__main__":
    sys.exit(main())
