"""Synthetic paired point clouds with a controllable modality gap.

Randomness comes from numpy's PCG64 bit generator seeded with the SynthSpec's
``seed``; the same (algorithm, seed) pair always reproduces the same clouds.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidSpec
from .geometry import PairingMap, PointCloud

STRUCTURES = ("clusters", "circle", "two-clusters-plus-cycle")


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class GapSpec:
    """Transform taking modality i to modality j: rotate, flip, translate, add noise."""

    angle: float = 0.0
    axes: tuple = (0, 1)
    sigma: float = 0.0
    translation: Optional[list] = None
    sign_flip: bool = False


@dataclass
class SynthSpec:
    n_points: int = 64
    dim: int = 16
    structure: str = "two-clusters-plus-cycle"
    k: int = 2
    spread: float = 0.1
    radius: float = 1.0
    noise: float = 0.05
    gap: GapSpec = field(default_factory=GapSpec)
    seed: int = 0

    def validate(self):
        if self.n_points < 2:
            raise InvalidSpec("n_points must be >= 2")
        if self.dim < 1:
            raise InvalidSpec("dim must be >= 1")
        if self.structure not in STRUCTURES:
            raise InvalidSpec(f"unknown structure {self.structure!r}")
        if min(self.spread, self.noise, self.gap.sigma) < 0:
            raise InvalidSpec("spread, noise and sigma must be >= 0")
        if self.structure == "clusters" and self.k < 1:
            raise InvalidSpec("clusters needs k >= 1")
        if self.structure != "clusters" and self.dim < 2:
            raise InvalidSpec(f"{self.structure} needs dim >= 2")
        a, b = self.gap.axes
        if self.gap.angle and not (0 <= a < self.dim and 0 <= b < self.dim and a != b):
            raise InvalidSpec("rotation axes must be two distinct coordinates")
        if self.gap.translation is not None and len(self.gap.translation) not in (1, self.dim):
            raise InvalidSpec("translation must have length 1 or dim")

    def to_dict(self):
        d = asdict(self)
        d["gap"]["axes"] = list(self.gap.axes)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        gap = dict(d.pop("gap", {}) or {})
        if "axes" in gap:
            gap["axes"] = tuple(gap["axes"])
        return cls(gap=GapSpec(**gap), **d)


def _circle(n, dim, radius, axes):
    theta = 2 * np.pi * np.arange(n) / n
    pts = np.zeros((n, dim))
    pts[:, axes[0]] = radius * np.cos(theta)
    pts[:, axes[1]] = radius * np.sin(theta)
    return pts


def _sample(spec, rng):
    n, d = spec.n_points, spec.dim
    if spec.structure == "clusters":
        centers = rng.normal(size=(spec.k, d))
        centers *= 2.0 / np.maximum(np.linalg.norm(centers, axis=1, keepdims=True), 1e-12)
        pts = centers[np.arange(n) % spec.k] + spec.spread * rng.normal(size=(n, d))
    elif spec.structure == "circle":
        pts = _circle(n, d, spec.radius, (0, 1))
    else:
        n_cluster = n // 4
        n_cycle = n - 2 * n_cluster
        axes = (1, 2) if d >= 3 else (0, 1)
        ring = _circle(n_cycle, d, spec.radius, axes)
        offset = np.zeros(d)
        offset[0] = 2.5 * spec.radius
        blobs = [
            sign * offset + spec.spread * rng.normal(size=(n_cluster, d)) for sign in (1.0, -1.0)
        ]
        pts = np.vstack([ring] + blobs)
    if spec.noise > 0:
        pts = pts + spec.noise * rng.normal(size=pts.shape)
    return pts


def apply_gap(points, gap, rng):
    out = np.array(points, dtype=float)
    if gap.angle:
        a, b = gap.axes
        c, s = np.cos(gap.angle), np.sin(gap.angle)
        xa, xb = out[:, a].copy(), out[:, b].copy()
        out[:, a] = c * xa - s * xb
        out[:, b] = s * xa + c * xb
    if gap.sign_flip:
        out = -out
    if gap.translation is not None:
        out = out + np.asarray(gap.translation, dtype=float)
    if gap.sigma > 0:
        out = out + gap.sigma * rng.normal(size=out.shape)
    return out


def generate(spec):
    """Sample modality i, derive modality j through the gap transform."""
    spec.validate()
    rng = make_rng(spec.seed)
    pts_i = _sample(spec, rng)
    pts_j = apply_gap(pts_i, spec.gap, rng)
    ids = np.arange(spec.n_points)
    return PointCloud(pts_i, ids), PointCloud(pts_j, ids.copy()), PairingMap.identity(spec.n_points)


def perturb_distinct(dist, seed=0):
    """Jitter off-diagonal entries so all are pairwise distinct.

    Each upper-triangle entry gets a distinct multiple of
    delta / (M + 1), delta = 1e-9 * (smallest positive entry), in a
    seeded random order; the result is mirrored to stay symmetric.
    """
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    if n < 2:
        return dist.copy()
    iu = np.triu_indices(n, 1)
    vals = dist[iu]
    positive = vals[vals > 0]
    delta = 1e-9 * (positive.min() if positive.size else 1.0)
    m = vals.size
    rng = make_rng(seed)
    for _ in range(16):
        jitter = delta * (rng.permutation(m) + 1) / (m + 1)
        out_vals = vals + jitter
        if np.unique(out_vals).size == m:
            break
    else:  # pragma: no cover - needs adversarial inputs
        raise RuntimeError("could not make entries distinct")
    out = np.zeros_like(dist)
    out[iu] = out_vals
    return out + out.T
