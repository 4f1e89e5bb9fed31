import json
import math

import numpy as np
import pytest

from conftest import random_genome
from eigen.cppn import (ConnectionGene, CppnGenome, NodeGene, RingGeometry,
                        activate, pattern_coords, render)
from eigen.errors import CyclicGenome


def genome_from(connections, hidden=(), out_bias=0.0, channels=1):
    nodes = [NodeGene(i, "input", "identity", 0.0) for i in range(4)]
    nodes += [NodeGene(4 + c, "output", "tanh", out_bias) for c in range(channels)]
    nodes += list(hidden)
    return CppnGenome(tuple(nodes), tuple(connections))


def constant_genome(value: float) -> CppnGenome:
    # output squash is (tanh+1)/2, so bias = atanh(2*value - 1)
    return genome_from((), out_bias=math.atanh(2.0 * value - 1.0))


class TestActivate:
    def test_bias_only_network(self):
        g = genome_from(())
        for inputs in ([0, 0, 0, 1], [1, -1, 0.5, 1], [9, 9, 9, 9]):
            assert activate(g, inputs) == [pytest.approx(0.5)]

    def test_zero_input_through_odd_squash(self):
        g = genome_from([ConnectionGene(0, 0, 4, 3.7, True)])
        assert activate(g, [0, 0.9, 0.2, 1])[0] == pytest.approx(0.5)

    def test_closed_form_single_connection(self):
        g = genome_from([ConnectionGene(0, 0, 4, 2.0, True)])
        expected = (math.tanh(2.0) + 1.0) / 2.0
        assert activate(g, [1, 0, 0, 1])[0] == pytest.approx(expected)
        assert expected == pytest.approx(0.9820, abs=1e-4)

    def test_cyclic_genome_raises(self):
        hidden = (NodeGene(5, "hidden", "tanh", 0.0),
                  NodeGene(6, "hidden", "tanh", 0.0))
        conns = [ConnectionGene(0, 5, 6, 1.0, True),
                 ConnectionGene(1, 6, 5, 1.0, True),
                 ConnectionGene(2, 6, 4, 1.0, True)]
        g = genome_from(conns, hidden=hidden)
        with pytest.raises(CyclicGenome):
            activate(g, [0, 0, 0, 1])

    def test_disabled_cycle_is_fine(self):
        hidden = (NodeGene(5, "hidden", "tanh", 0.0),
                  NodeGene(6, "hidden", "tanh", 0.0))
        conns = [ConnectionGene(0, 5, 6, 1.0, True),
                 ConnectionGene(1, 6, 5, 1.0, False),
                 ConnectionGene(2, 6, 4, 1.0, True)]
        activate(genome_from(conns, hidden=hidden), [0, 0, 0, 1])

    def test_deterministic(self):
        g = random_genome(7)
        a = activate(g, [0.3, -0.2, 0.36, 1.0])
        b = activate(g, [0.3, -0.2, 0.36, 1.0])
        assert a == b


class TestPatternCoords:
    def test_center_outside_when_inner_radius_positive(self):
        geom = RingGeometry(center=(50, 50), inner_radius=10.0)
        assert not pattern_coords(50, 50, geom).inside

    def test_inner_boundary(self):
        geom = RingGeometry(center=(50, 50), inner_radius=10.0, band_width=5.0)
        pc = pattern_coords(60, 50, geom)  # r = inner_radius, theta = 0
        assert pc.inside
        assert pc.band_index == 0
        assert pc.v == pytest.approx(-1.0)

    def test_hand_computed_band(self):
        geom = RingGeometry(center=(0, 0), inner_radius=10.0, band_width=5.0,
                            ring_count=4)
        pc = pattern_coords(0, 17, geom)
        assert pc.band_index == 1
        assert pc.v == pytest.approx(2 * (2 / 5) - 1)  # -0.2

    def test_outside_outer_radius(self):
        geom = RingGeometry(center=(0, 0), inner_radius=10.0, band_width=5.0,
                            ring_count=2)
        assert not pattern_coords(0, 25, geom).inside
        assert pattern_coords(0, 19.9, geom).inside

    def test_u_range_and_periodicity(self):
        geom = RingGeometry(center=(0, 0), angular_period=6)
        for ang in np.linspace(-np.pi, np.pi, 37):
            pc = pattern_coords(30 * np.cos(ang), 30 * np.sin(ang), geom)
            assert -1.0 <= pc.u <= 1.0


class TestRender:
    GEOM = RingGeometry(center=(80, 60), ring_count=4, band_width=10.0,
                        angular_period=8, inner_radius=10.0)

    def test_constant_genome_exposes_inversion(self):
        img = render(constant_genome(0.3), self.GEOM, 160, 120, "gray")
        # along theta=0: band k starts at x = 80 + 10 + 10k
        assert img.pixels[60, 95, 0] == pytest.approx(0.3)   # band 0
        assert img.pixels[60, 105, 0] == pytest.approx(0.7)  # band 1
        assert img.pixels[60, 115, 0] == pytest.approx(0.3)  # band 2
        assert img.pixels[60, 140, 0] == pytest.approx(1.0)  # outside
        assert img.pixels[60, 80, 0] == pytest.approx(1.0)   # inside inner radius

    def test_binary_mode(self):
        img = render(constant_genome(0.3), self.GEOM, 160, 120, "binary")
        assert img.pixels[60, 95, 0] == 0.0
        assert img.pixels[60, 105, 0] == 1.0
        assert set(np.unique(img.pixels)) <= {0.0, 1.0}

    def test_adjacent_band_inversion(self):
        g = random_genome(3)
        img = render(g, self.GEOM, 160, 120, "gray")
        # pixels on the theta=0 ray, same offset into adjacent bands,
        # share (u, v, d) exactly
        for k in range(3):
            for off in (1, 4, 7):
                a = img.pixels[60, 90 + 10 * k + off, 0]
                b = img.pixels[60, 90 + 10 * (k + 1) + off, 0]
                assert a == pytest.approx(1.0 - b, abs=1e-12)

    def test_angular_periodicity_at_symmetric_pixels(self):
        # angular_period 8 and axis-aligned center: (80+r, 60) and (80, 60+r)
        # sit exactly 2 cycles apart
        g = random_genome(5)
        img = render(g, self.GEOM, 160, 120, "gray")
        for r in (12, 25, 37, 48):
            assert img.pixels[60, 80 + r, 0] == pytest.approx(
                img.pixels[60 + r, 80, 0], abs=1e-12)

    def test_output_range(self):
        for seed in range(8):
            img = render(random_genome(seed), self.GEOM, 160, 120, "gray")
            assert img.pixels.min() >= 0.0
            assert img.pixels.max() <= 1.0

    def test_color_mode_needs_three_outputs(self):
        with pytest.raises(ValueError):
            render(constant_genome(0.3), self.GEOM, 160, 120, "color")
        g3 = random_genome(11, channels=3)
        img = render(g3, self.GEOM, 160, 120, "color")
        assert img.channels == 3

    def test_global_coordinates_mode(self):
        img = render(random_genome(2), None, 40, 30, "gray")
        assert img.width == 40 and img.height == 30
        assert img.pixels.min() >= 0.0 and img.pixels.max() <= 1.0


class TestSerialization:
    def test_round_trip(self):
        g = random_genome(9)
        back = CppnGenome.from_json(g.to_json())
        assert back == g

    def test_json_shape(self):
        g = random_genome(9)
        doc = json.loads(g.to_json())
        assert set(doc) == {"nodes", "connections"}
        assert set(doc["nodes"][0]) == {"node_id", "kind", "activation", "bias"}
        assert set(doc["connections"][0]) == {
            "innovation_id", "from_node", "to_node", "weight", "enabled"}

    def test_canonical_under_gene_reordering(self):
        g = random_genome(9)
        shuffled = CppnGenome(tuple(reversed(g.nodes)),
                              tuple(reversed(g.connections)))
        assert shuffled.to_json() == g.to_json()


class TestInvariants:
    def test_duplicate_node_id_rejected(self):
        nodes = [NodeGene(i, "input", "identity", 0.0) for i in range(4)]
        nodes += [NodeGene(3, "output", "tanh", 0.0)]
        with pytest.raises(ValueError):
            CppnGenome(tuple(nodes), ())

    def test_duplicate_innovation_rejected(self):
        conns = [ConnectionGene(0, 0, 4, 1.0, True),
                 ConnectionGene(0, 1, 4, 1.0, True)]
        with pytest.raises(ValueError):
            genome_from(conns)
