"""CPPN genomes and their rendering into ring-patterned images.

A genome is a small feed-forward network mapping pattern coordinates to pixel
intensities. Rendering constrains output to concentric bands around a center,
with the pattern inverted on every other band.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import CyclicGenome
from .imaging import Raster

INPUT_COUNT = 4  # (u, v, d, bias)

ACTIVATIONS = {
    "sigmoid": lambda x: 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0))),
    "tanh": np.tanh,
    "sine": np.sin,
    "gaussian": lambda x: np.exp(-np.clip(x, -60.0, 60.0) ** 2),
    "abs": np.abs,
    "identity": lambda x: x,
}

KINDS = ("input", "hidden", "output")


@dataclass(frozen=True)
class NodeGene:
    node_id: int
    kind: str  # input | hidden | output
    activation: str
    bias: float


@dataclass(frozen=True)
class ConnectionGene:
    innovation_id: int
    from_node: int
    to_node: int
    weight: float
    enabled: bool


@dataclass(frozen=True)
class CppnGenome:
    nodes: tuple[NodeGene, ...]
    connections: tuple[ConnectionGene, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "connections", tuple(self.connections))
        node_ids = [n.node_id for n in self.nodes]
        if len(set(node_ids)) != len(node_ids):
            raise ValueError("duplicate node ids")
        innos = [c.innovation_id for c in self.connections]
        if len(set(innos)) != len(innos):
            raise ValueError("duplicate innovation ids")
        if len(self.input_ids()) != INPUT_COUNT:
            raise ValueError(f"genome must have exactly {INPUT_COUNT} input nodes")

    def input_ids(self) -> list[int]:
        return [n.node_id for n in self.nodes if n.kind == "input"]

    def output_ids(self) -> list[int]:
        return [n.node_id for n in self.nodes if n.kind == "output"]

    @property
    def channel_count(self) -> int:
        return len(self.output_ids())

    def node(self, node_id: int) -> NodeGene:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)

    def to_json(self) -> str:
        """Canonical JSON serialization (sorted genes, stable key order)."""
        doc = {
            "nodes": [
                {"node_id": n.node_id, "kind": n.kind, "activation": n.activation,
                 "bias": n.bias}
                for n in sorted(self.nodes, key=lambda n: n.node_id)
            ],
            "connections": [
                {"innovation_id": c.innovation_id, "from_node": c.from_node,
                 "to_node": c.to_node, "weight": c.weight, "enabled": c.enabled}
                for c in sorted(self.connections, key=lambda c: c.innovation_id)
            ],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "CppnGenome":
        doc = json.loads(text)
        nodes = tuple(NodeGene(n["node_id"], n["kind"], n["activation"], n["bias"])
                      for n in doc["nodes"])
        conns = tuple(ConnectionGene(c["innovation_id"], c["from_node"], c["to_node"],
                                     c["weight"], c["enabled"])
                      for c in doc["connections"])
        return cls(nodes, conns)


def minimal_genome(channels: int, rng: np.random.Generator,
                   weight_sigma: float = 0.05) -> CppnGenome:
    """Fully-connected input->output genome with gaussian weights.

    Node ids 0..3 are the inputs, 4..4+channels-1 the outputs; the initial
    innovation ids are the connection indices (shared by every starting genome
    so matching genes line up across the population).
    """
    nodes = [NodeGene(i, "input", "identity", 0.0) for i in range(INPUT_COUNT)]
    nodes += [NodeGene(INPUT_COUNT + c, "output", "tanh", 0.0) for c in range(channels)]
    conns = []
    inno = 0
    for c in range(channels):
        for i in range(INPUT_COUNT):
            w = float(rng.normal(0.0, weight_sigma))
            conns.append(ConnectionGene(inno, i, INPUT_COUNT + c, w, True))
            inno += 1
    return CppnGenome(tuple(nodes), tuple(conns))


def topological_order(genome: CppnGenome) -> list[int]:
    """Kahn's algorithm over enabled connections; raises CyclicGenome."""
    ids = [n.node_id for n in genome.nodes]
    indeg = {i: 0 for i in ids}
    out_edges: dict[int, list[int]] = {i: [] for i in ids}
    for c in genome.connections:
        if c.enabled:
            indeg[c.to_node] += 1
            out_edges[c.from_node].append(c.to_node)
    ready = sorted(i for i in ids if indeg[i] == 0)
    order = []
    while ready:
        n = ready.pop(0)
        order.append(n)
        for m in sorted(out_edges[n]):
            indeg[m] -= 1
            if indeg[m] == 0:
                ready.append(m)
        ready.sort()
    if len(order) != len(ids):
        raise CyclicGenome("enabled connection graph has a cycle")
    return order


def would_create_cycle(genome: CppnGenome, from_node: int, to_node: int) -> bool:
    """True if adding from_node->to_node would make the enabled graph cyclic."""
    if from_node == to_node:
        return True
    # cycle iff to_node already reaches from_node
    out_edges: dict[int, list[int]] = {n.node_id: [] for n in genome.nodes}
    for c in genome.connections:
        if c.enabled:
            out_edges[c.from_node].append(c.to_node)
    stack, seen = [to_node], set()
    while stack:
        n = stack.pop()
        if n == from_node:
            return True
        if n in seen:
            continue
        seen.add(n)
        stack.extend(out_edges[n])
    return False


def _forward(genome: CppnGenome, inputs):
    """Evaluate the network; inputs may be 4 scalars or 4 equally-shaped arrays.

    Output nodes ignore their activation field and squash with (tanh+1)/2 so
    intensities land in [0, 1].
    """
    order = topological_order(genome)
    incoming: dict[int, list[ConnectionGene]] = {}
    for c in genome.connections:
        if c.enabled:
            incoming.setdefault(c.to_node, []).append(c)
    input_ids = genome.input_ids()
    values: dict[int, np.ndarray | float] = {}
    for node_id in order:
        if node_id in input_ids:
            values[node_id] = inputs[input_ids.index(node_id)]
            continue
        node = genome.node(node_id)
        total = node.bias
        for c in incoming.get(node_id, []):
            total = total + c.weight * values[c.from_node]
        if node.kind == "output":
            values[node_id] = (np.tanh(total) + 1.0) / 2.0
        else:
            values[node_id] = ACTIVATIONS[node.activation](total)
    return [values[o] for o in genome.output_ids()]


def activate(genome: CppnGenome, inputs) -> list[float]:
    """Feed-forward evaluation of 4 scalar inputs to C scalar outputs in [0, 1]."""
    if len(inputs) != INPUT_COUNT:
        raise ValueError(f"expected {INPUT_COUNT} inputs")
    return [float(v) for v in _forward(genome, [float(x) for x in inputs])]


@dataclass(frozen=True)
class RingGeometry:
    """Concentric-band layout the renderer constrains images to."""

    center: tuple[float, float]
    ring_count: int = 4
    band_width: float = 10.0
    angular_period: int = 8
    inner_radius: float = 10.0

    def __post_init__(self):
        if self.ring_count < 2:
            raise ValueError("ring_count must be >= 2")
        if self.band_width <= 0:
            raise ValueError("band_width must be positive")
        if self.angular_period < 1:
            raise ValueError("angular_period must be >= 1")

    @property
    def outer_radius(self) -> float:
        return self.inner_radius + self.ring_count * self.band_width


@dataclass(frozen=True)
class PatternCoords:
    u: float  # triangle-wave phase along the band, in [-1, 1]
    v: float  # radial position within the band, in [-1, 1]
    band_index: int
    inside: bool


def _coords_arrays(px, py, geom: RingGeometry):
    dx = np.asarray(px, dtype=np.float64) - geom.center[0]
    dy = np.asarray(py, dtype=np.float64) - geom.center[1]
    r = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)  # [-pi, pi]
    band = np.floor((r - geom.inner_radius) / geom.band_width).astype(np.int64)
    inside = (r >= geom.inner_radius) & (r < geom.outer_radius)
    phase = np.mod(theta / (2.0 * np.pi) * geom.angular_period, 1.0)
    u = 1.0 - 4.0 * np.abs(phase - 0.5)  # triangle wave, no seam at theta = 0
    v = 2.0 * np.mod((r - geom.inner_radius) / geom.band_width, 1.0) - 1.0
    return u, v, band, inside


def pattern_coords(px: float, py: float, geom: RingGeometry) -> PatternCoords:
    """Map a pixel to band-local coordinates around the geometry's center."""
    u, v, band, inside = _coords_arrays(px, py, geom)
    return PatternCoords(float(u), float(v), int(band), bool(inside))


def render(genome: CppnGenome, geom: RingGeometry | None, width: int, height: int,
           mode: str = "gray") -> Raster:
    """Render the genome over a width x height grid.

    Inside the rings the genome sees (u, v, d, 1) with d = sqrt(u^2 + v^2);
    odd bands are inverted (1 - value). Outside is white. With geom=None the
    genome sees normalized global coordinates instead (ablation path).
    Binary mode thresholds gray output at 0.5.
    """
    if mode not in ("gray", "color", "binary"):
        raise ValueError(f"unknown mode {mode!r}")
    channels = 3 if mode == "color" else 1
    if genome.channel_count != channels:
        raise ValueError(
            f"mode {mode!r} needs {channels} output node(s), genome has {genome.channel_count}")

    ys, xs = np.mgrid[0:height, 0:width]
    if geom is None:
        u = 2.0 * xs / max(width - 1, 1) - 1.0
        v = 2.0 * ys / max(height - 1, 1) - 1.0
        inside = np.ones((height, width), dtype=bool)
        band = np.zeros((height, width), dtype=np.int64)
    else:
        u, v, band, inside = _coords_arrays(xs, ys, geom)
    d = np.hypot(u, v)
    outs = _forward(genome, [u, v, d, np.ones_like(d)])
    img = np.stack([np.broadcast_to(o, (height, width)) for o in outs], axis=2)
    img = np.where((band % 2 == 1)[:, :, None], 1.0 - img, img)
    img = np.where(inside[:, :, None], img, 1.0)
    if mode == "binary":
        img = np.where(img >= 0.5, 1.0, 0.0)
    return Raster(np.clip(img, 0.0, 1.0))
