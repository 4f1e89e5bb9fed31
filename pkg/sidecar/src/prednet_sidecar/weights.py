"""HDF5 weight loading for the frame predictor.

Two layouts are accepted:

1. Keras `save_weights` layout: a top-level `layer_names` attribute,
   one group per layer, each with a `weight_names` attribute listing its
   datasets in trainable-variable order. For the predictor's single
   custom layer that order is: gates sorted alphabetically
   ("a", "ahat", "c", "f", "i", "o"), levels ascending within a gate,
   kernel before bias. Datasets are matched to the architecture by that
   order and verified by shape, so the exact variable names do not
   matter.

2. Flat layout: datasets named "<gate>_<level>_kernel" /
   "<gate>_<level>_bias" at any depth (useful for re-exported weights).

Kernels are stored channels-last: (kh, kw, in_channels, out_channels).
"""

from __future__ import annotations

from pathlib import Path

import h5py
import numpy as np

from .model import ModelError, PredNetParams, WeightsError

WeightDict = dict[tuple[str, int], tuple[np.ndarray, np.ndarray]]


def _ordered_datasets(f: h5py.File) -> list[tuple[str, np.ndarray]]:
    """All datasets as (name, array), honoring Keras ordering attributes."""
    out: list[tuple[str, np.ndarray]] = []
    if "layer_names" in f.attrs:
        for layer_name in f.attrs["layer_names"]:
            name = layer_name.decode() if isinstance(layer_name, bytes) \
                else str(layer_name)
            group = f[name]
            for weight_name in group.attrs.get("weight_names", ()):
                wname = weight_name.decode() if isinstance(weight_name, bytes) \
                    else str(weight_name)
                out.append((wname, np.asarray(group[wname])))
        return out

    def visit(name, obj):
        if isinstance(obj, h5py.Dataset):
            out.append((name, np.asarray(obj)))
    f.visititems(visit)
    return out


def _flat_lookup(datasets: list[tuple[str, np.ndarray]],
                 params: PredNetParams) -> WeightDict | None:
    """Try the "<gate>_<level>_<part>" naming convention; None if absent."""
    by_suffix = {}
    for name, arr in datasets:
        by_suffix[name.rsplit("/", 1)[-1].split(":")[0]] = arr
    result: WeightDict = {}
    for gate, level, part, _ in params.expected_weight_shapes():
        key = f"{gate}_{level}_{part}"
        if key not in by_suffix:
            return None
        if part == "kernel":
            result[(gate, level)] = (by_suffix[key], None)
        else:
            kernel, _ = result[(gate, level)]
            result[(gate, level)] = (kernel, by_suffix[key])
    return result


def _ordered_match(datasets: list[tuple[str, np.ndarray]],
                   params: PredNetParams) -> WeightDict:
    """Match datasets to the canonical storage order, verified by shape."""
    spec = params.expected_weight_shapes()
    arrays = [arr for _, arr in datasets]
    if len(arrays) != len(spec):
        raise WeightsError(
            f"weights file holds {len(arrays)} arrays, architecture "
            f"needs {len(spec)}")
    result: WeightDict = {}
    for (gate, level, part, shape), arr in zip(spec, arrays):
        if tuple(arr.shape) != shape:
            raise WeightsError(
                f"array for {gate}[{level}].{part} has shape "
                f"{tuple(arr.shape)}, expected {shape}")
        if part == "kernel":
            result[(gate, level)] = (arr, None)
        else:
            kernel, _ = result[(gate, level)]
            result[(gate, level)] = (kernel, arr)
    return result


def _parse_flat_names(datasets: list[tuple[str, np.ndarray]]) \
        -> dict[tuple[str, int, str], np.ndarray] | None:
    """Index datasets by (gate, level, part) if flat-named; else None."""
    from .model import GATES
    parsed = {}
    for name, arr in datasets:
        leaf = name.rsplit("/", 1)[-1].split(":")[0]
        pieces = leaf.rsplit("_", 2)
        if len(pieces) != 3:
            return None
        gate, level, part = pieces
        if gate not in GATES or part not in ("kernel", "bias") \
                or not level.isdigit():
            return None
        parsed[(gate, int(level), part)] = arr
    return parsed


def infer_params(path: str | Path) -> PredNetParams:
    """Derive the architecture from a weights file's array shapes."""
    datasets = _read_datasets(path)
    flat = _parse_flat_names(datasets)
    if flat is not None:
        levels = 1 + max(l for g, l, _ in flat if g == "ahat")
        ahat_kernels = [flat[("ahat", l, "kernel")] for l in range(levels)]
        a_kernels = [flat[("a", l, "kernel")] for l in range(levels - 1)]
        c_kernels = [flat[("c", l, "kernel")] for l in range(levels)]
    else:
        count = len(datasets)
        if count < 10 or (count + 2) % 12:
            raise WeightsError(
                f"weights file holds {count} arrays, which matches no "
                f"supported architecture (expected 12*levels - 2)")
        levels = (count + 2) // 12
        arrays = [arr for _, arr in datasets]
        a_kernels = arrays[0:2 * (levels - 1):2]
        base = 2 * (levels - 1)
        ahat_kernels = arrays[base:base + 2 * levels:2]
        base += 2 * levels
        c_kernels = arrays[base:base + 2 * levels:2]
    try:
        return PredNetParams(
            stack_sizes=tuple(int(k.shape[3]) for k in ahat_kernels),
            r_stack_sizes=tuple(int(k.shape[2]) for k in ahat_kernels),
            a_filt_sizes=tuple(int(k.shape[0]) for k in a_kernels),
            ahat_filt_sizes=tuple(int(k.shape[0]) for k in ahat_kernels),
            r_filt_sizes=tuple(int(k.shape[0]) for k in c_kernels))
    except (IndexError, ModelError) as exc:
        raise WeightsError(
            f"cannot infer an architecture from {path}: {exc}") from exc


def _read_datasets(path: str | Path) -> list[tuple[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise WeightsError(f"weights file not found: {path}")
    try:
        with h5py.File(path, "r") as f:
            datasets = _ordered_datasets(f)
    except OSError as exc:
        raise WeightsError(f"cannot read weights file {path}: {exc}") from exc
    if not datasets:
        raise WeightsError(f"weights file {path} holds no arrays")
    return datasets


def load_weights(path: str | Path, params: PredNetParams) -> WeightDict:
    """Load and shape-check a weight file for the given architecture."""
    datasets = _read_datasets(path)
    flat = _flat_lookup(datasets, params)
    if flat is not None:
        for (gate, level, part, shape) in params.expected_weight_shapes():
            arr = flat[(gate, level)][0 if part == "kernel" else 1]
            if tuple(arr.shape) != shape:
                raise WeightsError(
                    f"array for {gate}[{level}].{part} has shape "
                    f"{tuple(arr.shape)}, expected {shape}")
        return flat
    return _ordered_match(datasets, params)
