"""Vector-field scoring: many vectors, strong but bounded, locally aligned,
locally opposed. Each condition contributes one additive, weighted term.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .flow import VectorField


@dataclass(frozen=True)
class FitnessParams:
    magnitude_cap: float = 2.0        # px; larger vectors are flow instabilities
    min_magnitude: float = 0.05       # px; smaller vectors are numeric noise
    neighborhood_radius: float = 20.0
    align_angle: float = 30.0         # degrees between directions
    oppose_angle: float = 30.0        # degrees from exact opposition
    weight_count: float = 1.0
    weight_magnitude: float = 1.0
    weight_align: float = 1.0
    weight_oppose: float = 1.0

    def __post_init__(self):
        if not (self.magnitude_cap > self.min_magnitude >= 0):
            raise ValueError("need magnitude_cap > min_magnitude >= 0")
        if self.neighborhood_radius <= 0:
            raise ValueError("neighborhood_radius must be positive")
        for a in (self.align_angle, self.oppose_angle):
            if not (0 < a < 90):
                raise ValueError("angles must lie in (0, 90) degrees")


@dataclass(frozen=True)
class FitnessScore:
    total: float
    n_valid: int
    magnitude_term: float
    align_term: float
    oppose_term: float

    def to_json(self) -> str:
        return json.dumps({
            "total": self.total, "n_valid": self.n_valid,
            "magnitude": self.magnitude_term,
            "align": self.align_term, "oppose": self.oppose_term,
        })


def score(field: VectorField, p: FitnessParams = FitnessParams()) -> FitnessScore:
    """Score tracked vectors against the four conditions.

    A vector is valid iff min_magnitude <= |v| <= magnitude_cap; only valid
    vectors count, contribute magnitude, or act as neighbors.
    """
    vecs = field.tracked()
    if not vecs:
        return FitnessScore(0.0, 0, 0.0, 0.0, 0.0)

    origins = np.array([v.origin for v in vecs])
    disps = np.array([v.displacement for v in vecs])
    mags = np.hypot(disps[:, 0], disps[:, 1])
    valid = (mags >= p.min_magnitude) & (mags <= p.magnitude_cap)
    if not valid.any():
        return FitnessScore(0.0, 0, 0.0, 0.0, 0.0)

    origins, disps, mags = origins[valid], disps[valid], mags[valid]
    n = len(mags)
    magnitude_term = float(mags.sum())

    dirs = disps / mags[:, None]
    dist = np.hypot(origins[:, 0, None] - origins[None, :, 0],
                    origins[:, 1, None] - origins[None, :, 1])
    neighbor = (dist <= p.neighborhood_radius) & ~np.eye(n, dtype=bool)
    cosine = np.clip(dirs @ dirs.T, -1.0, 1.0)

    cos_align = math.cos(math.radians(p.align_angle))
    cos_oppose = -math.cos(math.radians(p.oppose_angle))
    align_term = float(((cosine >= cos_align) & neighbor).any(axis=1).sum())
    oppose_term = float(((cosine <= cos_oppose) & neighbor).any(axis=1).sum())

    total = (p.weight_count * n + p.weight_magnitude * magnitude_term
             + p.weight_align * align_term + p.weight_oppose * oppose_term)
    return FitnessScore(total, n, magnitude_term, align_term, oppose_term)


def rank(fields: list[VectorField], p: FitnessParams = FitnessParams()) -> list[int]:
    """Indices ordered best first: by total, then n_valid, then input index."""
    scores = [score(f, p) for f in fields]
    return sorted(range(len(fields)),
                  key=lambda i: (-scores[i].total, -scores[i].n_valid, i))
