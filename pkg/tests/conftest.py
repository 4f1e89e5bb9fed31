import numpy as np
import pytest

from eigen import cppn, neat
from eigen.imaging import Raster


def random_genome(seed: int, channels: int = 1, mutations: int = 6,
                  weight_sigma: float = 1.0) -> cppn.CppnGenome:
    """A minimal genome pushed through a few mutations; structure varies."""
    rng = np.random.default_rng(seed)
    g = cppn.minimal_genome(channels, rng, weight_sigma)
    tracker = neat.InnovationTracker(
        max(c.innovation_id for c in g.connections) + 1,
        max(n.node_id for n in g.nodes) + 1)
    params = neat.NeatParams(add_connection_rate=0.5, add_node_rate=0.3)
    for _ in range(mutations):
        g = neat.mutate(g, params, rng, tracker)
    return g


def textured_raster(seed: int, width: int = 160, height: int = 120) -> Raster:
    """Smooth random texture with plenty of trackable corners."""
    import cv2
    rng = np.random.default_rng(seed)
    noise = cv2.GaussianBlur(rng.random((height, width)), (0, 0), 1.5)
    noise = (noise - noise.min()) / (noise.max() - noise.min())
    return Raster(noise)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
