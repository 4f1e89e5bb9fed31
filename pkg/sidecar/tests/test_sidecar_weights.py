import h5py
import numpy as np
import pytest

from prednet_sidecar.model import PredNet, WeightsError, params_for_variant
from prednet_sidecar.weights import infer_params, load_weights
from sc_helpers import (random_weights, tiny_params, write_flat_layout,
                        write_keras_layout)


def assert_same_weights(a, b, params):
    for gate, level, part, _ in params.expected_weight_shapes():
        idx = 0 if part == "kernel" else 1
        assert np.array_equal(a[(gate, level)][idx], b[(gate, level)][idx])


class TestLoad:
    def test_keras_layout_round_trip(self, tmp_path):
        params = tiny_params()
        weights = random_weights(params, seed=7)
        path = tmp_path / "w.hdf5"
        write_keras_layout(path, params, weights)
        assert_same_weights(load_weights(path, params), weights, params)

    def test_flat_layout_round_trip(self, tmp_path):
        params = tiny_params()
        weights = random_weights(params, seed=8)
        path = tmp_path / "w.hdf5"
        write_flat_layout(path, params, weights)
        assert_same_weights(load_weights(path, params), weights, params)

    def test_loaded_weights_drive_the_model(self, tmp_path):
        params = tiny_params()
        weights = random_weights(params, seed=9)
        path = tmp_path / "w.hdf5"
        write_keras_layout(path, params, weights)
        frames = np.random.default_rng(0).random((3, 8, 8, 1))
        direct = PredNet(params, weights).predict(frames, 2)
        loaded = PredNet(params, load_weights(path, params)).predict(frames, 2)
        assert np.array_equal(direct, loaded)


class TestInferParams:
    def test_keras_layout(self, tmp_path):
        params = tiny_params(channels=3)
        path = tmp_path / "w.hdf5"
        write_keras_layout(path, params, random_weights(params))
        assert infer_params(path) == params

    def test_flat_layout(self, tmp_path):
        params = tiny_params()
        path = tmp_path / "w.hdf5"
        write_flat_layout(path, params, random_weights(params))
        assert infer_params(path) == params

    def test_full_size_gray_architecture(self, tmp_path):
        params = params_for_variant("gray")
        path = tmp_path / "w.hdf5"
        write_keras_layout(path, params, random_weights(params))
        assert infer_params(path) == params

    def test_unrecognized_array_count(self, tmp_path):
        path = tmp_path / "w.hdf5"
        with h5py.File(path, "w") as f:
            for i in range(7):
                f.create_dataset(f"x{i}", data=np.zeros((2, 2)))
        with pytest.raises(WeightsError, match="no supported architecture"):
            infer_params(path)


class TestErrors:
    def test_missing_file(self, tmp_path):
        with pytest.raises(WeightsError, match="not found"):
            load_weights(tmp_path / "nope.hdf5", tiny_params())

    def test_not_an_hdf5_file(self, tmp_path):
        path = tmp_path / "garbage.hdf5"
        path.write_bytes(b"this is not hdf5")
        with pytest.raises(WeightsError, match="cannot read"):
            load_weights(path, tiny_params())

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.hdf5"
        with h5py.File(path, "w"):
            pass
        with pytest.raises(WeightsError, match="no arrays"):
            load_weights(path, tiny_params())

    def test_wrong_architecture(self, tmp_path):
        # weights for a 1-channel model do not load as a 3-channel model
        params_gray = tiny_params(channels=1)
        path = tmp_path / "w.hdf5"
        write_keras_layout(path, params_gray, random_weights(params_gray))
        with pytest.raises(WeightsError, match="shape"):
            load_weights(path, tiny_params(channels=3))

    def test_wrong_array_count(self, tmp_path):
        path = tmp_path / "w.hdf5"
        with h5py.File(path, "w") as f:
            f.create_dataset("only_one", data=np.zeros((3, 3, 1, 1)))
        with pytest.raises(WeightsError, match="needs"):
            load_weights(path, tiny_params())
