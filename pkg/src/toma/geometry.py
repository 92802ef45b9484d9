"""Point clouds, distances and cross-modal pairing maps."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import DuplicateId, LengthMismatch, ParseError, TomaError, ZeroVector

EPS = 1e-12
METRICS = ("euclidean", "cosine")


@dataclass(frozen=True)
class PointCloud:
    """N points in R^d plus one stable integer id per point."""

    points: np.ndarray
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise TomaError("a point cloud needs an N x d array with N >= 1")
        if not np.all(np.isfinite(pts)):
            raise TomaError("point coordinates must be finite")
        ids = np.arange(pts.shape[0]) if self.ids is None else np.asarray(self.ids, dtype=np.int64)
        if ids.shape != (pts.shape[0],):
            raise LengthMismatch(f"{ids.shape[0]} ids for {pts.shape[0]} points")
        if np.unique(ids).size != ids.size:
            raise DuplicateId("point ids must be unique")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "ids", ids)

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def with_points(self, points):
        return PointCloud(points, self.ids.copy())

    def subset(self, index):
        index = np.asarray(index, dtype=np.int64)
        return PointCloud(self.points[index], self.ids[index])


def _as_points(cloud):
    return cloud.points if isinstance(cloud, PointCloud) else np.atleast_2d(np.asarray(cloud, dtype=float))


def normalize(cloud):
    """Scale every row to unit Euclidean norm."""
    norms = np.linalg.norm(cloud.points, axis=1)
    if np.any(norms <= EPS):
        raise ZeroVector(f"rows {np.flatnonzero(norms <= EPS).tolist()} have zero norm")
    return cloud.with_points(cloud.points / norms[:, None])


def pairwise_distances(cloud, metric="euclidean"):
    """Full N x N distance matrix.

    The upper triangle is computed once and mirrored, so the result is
    exactly symmetric with a zero diagonal. ``metric="cosine"`` gives
    ``1 - cos`` clipped at zero.
    """
    pts = _as_points(cloud)
    if metric not in METRICS:
        raise TomaError(f"unknown metric {metric!r}")
    if pts.shape[0] == 1:
        return np.zeros((1, 1))
    if metric == "cosine":
        if np.any(np.linalg.norm(pts, axis=1) <= EPS):
            raise ZeroVector("cosine distance is undefined for zero rows")
        condensed = np.maximum(pdist(pts, "cosine"), 0.0)
    else:
        condensed = pdist(pts, "euclidean")
    return squareform(condensed, checks=False)


def cosine_similarity(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu <= EPS or nv <= EPS:
        raise ZeroVector("cosine similarity of a zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


@dataclass(frozen=True)
class PairingMap:
    """Index correspondence between two modalities.

    ``forward[k]`` is the index in modality j paired with index k of
    modality i, or -1 when k is unpaired; ``backward`` is the inverse.
    """

    forward: np.ndarray
    backward: np.ndarray

    @classmethod
    def identity(cls, n):
        idx = np.arange(n)
        return cls(idx, idx.copy())

    @classmethod
    def from_forward(cls, forward, n_j=None):
        forward = np.asarray(forward, dtype=np.int64)
        n_j = forward.size if n_j is None else n_j
        covered = forward >= 0
        if np.unique(forward[covered]).size != covered.sum():
            raise DuplicateId("pairing is not injective")
        backward = np.full(n_j, -1, dtype=np.int64)
        backward[forward[covered]] = np.flatnonzero(covered)
        return cls(forward, backward)

    def inverse(self):
        return PairingMap(self.backward.copy(), self.forward.copy())

    @property
    def covered(self):
        """Indices of modality i that have a partner."""
        return np.flatnonzero(self.forward >= 0)

    def is_complete(self):
        return bool(np.all(self.forward >= 0) and np.all(self.backward >= 0))

    def restrict(self, keep):
        """Drop pairs whose modality-i index is not in ``keep``."""
        forward = np.full_like(self.forward, -1)
        keep = np.asarray(keep, dtype=np.int64)
        forward[keep] = self.forward[keep]
        return PairingMap.from_forward(forward, self.backward.size)


def build_pairing(ids_i, ids_j):
    """Pair positions whose ids agree across the two modalities."""
    ids_i = [int(x) for x in ids_i]
    ids_j = [int(x) for x in ids_j]
    if len(ids_i) != len(ids_j):
        raise LengthMismatch(f"{len(ids_i)} ids vs {len(ids_j)} ids")
    for side, ids in (("i", ids_i), ("j", ids_j)):
        if len(set(ids)) != len(ids):
            raise DuplicateId(f"duplicate ids in modality {side}")
    where_j = {x: k for k, x in enumerate(ids_j)}
    forward = np.array([where_j.get(x, -1) for x in ids_i], dtype=np.int64)
    return PairingMap.from_forward(forward, len(ids_j))


def read_cloud_csv(path):
    """Read ``id,x0,...,x{d-1}`` rows into a PointCloud."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "id" or header[1:] != [f"x{k}" for k in range(len(header) - 1)]:
        raise ParseError(f"{path}: expected header id,x0,x1,...")
    body = [r for r in rows[1:] if r]
    if not body:
        raise ParseError(f"{path}: no data rows")
    try:
        ids = [int(r[0]) for r in body]
        pts = [[float(v) for v in r[1:]] for r in body]
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if any(len(p) != len(header) - 1 for p in pts):
        raise ParseError(f"{path}: ragged rows")
    try:
        return PointCloud(np.array(pts, dtype=float), ids)
    except TomaError as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_cloud_csv(cloud, path):
    d = cloud.dim
    lines = ["id," + ",".join(f"x{k}" for k in range(d))]
    for pid, row in zip(cloud.ids, cloud.points):
        lines.append(str(int(pid)) + "," + ",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_pairing_csv(path):
    """Read ``id_i,id_j`` rows; returns the list of (id_i, id_j) pairs."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or [h.strip() for h in rows[0]] != ["id_i", "id_j"]:
        raise ParseError(f"{path}: expected header id_i,id_j")
    try:
        return [(int(a), int(b)) for a, b in rows[1:]]
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_pairing_csv(pairs, path):
    lines = ["id_i,id_j"] + [f"{int(a)},{int(b)}" for a, b in pairs]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def pairing_from_id_pairs(cloud_i, cloud_j, pairs):
    """PairingMap between two clouds from explicit (id_i, id_j) pairs."""
    pos_i = {int(x): k for k, x in enumerate(cloud_i.ids)}
    pos_j = {int(x): k for k, x in enumerate(cloud_j.ids)}
    forward = np.full(len(cloud_i), -1, dtype=np.int64)
    for a, b in pairs:
        if a not in pos_i or b not in pos_j:
            raise LengthMismatch(f"pair ({a}, {b}) refers to an unknown id")
        if forward[pos_i[a]] >= 0:
            raise DuplicateId(f"id {a} paired twice")
        forward[pos_i[a]] = pos_j[b]
    return PairingMap.from_forward(forward, len(cloud_j))
