"""Persistence diagrams, Wasserstein matching and persistence images."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import BoundsMismatch, DimMismatch, TomaError

PI_RESOLUTION = 20
PI_SIGMA_FRACTION = 0.1
PI_SIGMA_FLOOR = 1e-6
PI_MARGIN = 0.1


@dataclass(frozen=True)
class PersistenceDiagram:
    dim: int
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise TomaError("diagram points must be finite; drop essential classes first")
        if np.any(pts[:, 0] < 0) or np.any(pts[:, 1] < pts[:, 0]):
            raise TomaError("diagram points need 0 <= birth <= death")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @property
    def persistence(self):
        return self.points[:, 1] - self.points[:, 0]

    def union(self, other):
        if other.dim != self.dim:
            raise DimMismatch(f"dim {self.dim} vs dim {other.dim}")
        return PersistenceDiagram(self.dim, np.vstack([self.points, other.points]))

    @classmethod
    def from_pairs(cls, pairs, dim, essential_death=None):
        """Diagram of one dimension from PersistencePair objects.

        Essential classes are dropped unless ``essential_death`` is given, in
        which case their death is replaced by that value.
        """
        pts = []
        for p in pairs:
            if p.dim != dim:
                continue
            if math.isinf(p.death):
                if essential_death is None:
                    continue
                pts.append((p.birth, max(essential_death, p.birth)))
            else:
                pts.append((p.birth, p.death))
        return cls(dim, np.array(pts, dtype=float).reshape(-1, 2))


def augmented_cost(p1, p2, q=1.0):
    """(m+n) x (m+n) cost matrix with diagonal slots, entries raised to q.

    Rows are the m points of ``p1`` followed by n diagonal slots; columns are
    the n points of ``p2`` followed by m diagonal slots. A point may only
    use its own diagonal slot; slot-to-slot transport is free.
    """
    m, n = len(p1), len(p2)
    cost = np.zeros((m + n, m + n))
    if m and n:
        cost[:m, :n] = np.max(np.abs(p1[:, None, :] - p2[None, :, :]), axis=2) ** q
    to_diag1 = ((p1[:, 1] - p1[:, 0]) / 2.0) ** q
    to_diag2 = ((p2[:, 1] - p2[:, 0]) / 2.0) ** q
    cost[:m, n:] = np.inf
    cost[m:, :n] = np.inf
    cost[np.arange(m), n + np.arange(m)] = to_diag1
    cost[m + np.arange(n), np.arange(n)] = to_diag2
    return cost


def _shared_constant_axis(p1, p2):
    """Coordinate index that is constant within each diagram, or None."""
    for k in (0, 1):
        if all(len(p) == 0 or np.all(p[:, k] == p[0, k]) for p in (p1, p2)):
            return k
    return None


def _line_matching(p1, p2, k, q):
    """Exact optimal matching when coordinate ``k`` is constant in each diagram.

    The ground cost then depends on the free coordinate only through
    max(|x - x'|, offset)^q, a convex function of x - x', so some optimal
    partial matching is non-crossing in sorted order and a monotone
    alignment DP (match / send left point / send right point to the
    diagonal) finds it in O(mn).
    """
    m, n = len(p1), len(p2)
    free = 1 - k
    c1 = p1[0, k] if m else 0.0
    c2 = p2[0, k] if n else 0.0
    offset = abs(c1 - c2) if m and n else 0.0
    o1 = np.argsort(p1[:, free], kind="stable")
    o2 = np.argsort(p2[:, free], kind="stable")
    x1, x2 = p1[o1, free], p2[o2, free]
    g1 = ((p1[o1, 1] - p1[o1, 0]) / 2.0) ** q
    g2 = ((p2[o2, 1] - p2[o2, 0]) / 2.0) ** q
    # Row recurrence: dp[a, b] = min(base[b], dp[a, b-1] + g2[b-1]) with
    # base = min(match, drop left) from row a-1. With G the prefix sums of
    # g2 this is G[b] + cummin(base - G), one vectorised pass per row.
    G = np.concatenate([[0.0], np.cumsum(g2)])
    from_base = np.zeros((m + 1, n + 1), dtype=bool)
    matched = np.zeros((m + 1, n + 1), dtype=bool)
    row = G.copy()
    for a in range(1, m + 1):
        base = row + g1[a - 1]
        base[1:] = np.minimum(
            base[1:], match := row[:-1] + np.maximum(np.abs(x1[a - 1] - x2), offset) ** q
        )
        matched[a, 1:] = base[1:] == match
        shifted = base - G
        run = np.minimum.accumulate(shifted)
        from_base[a] = shifted <= np.concatenate([[np.inf], run[:-1]])
        row = G + run
        row[from_base[a]] = base[from_base[a]]
    total = float(row[n])
    matching = []
    a, b = m, n
    while a or b:
        if a == 0 or not from_base[a, b]:
            matching.append((-1, int(o2[b - 1])))
            b -= 1
        elif b > 0 and matched[a, b]:
            matching.append((int(o1[a - 1]), int(o2[b - 1])))
            a, b = a - 1, b - 1
        else:
            matching.append((int(o1[a - 1]), -1))
            a -= 1
    return total, matching[::-1]


def wasserstein_matching(d1, d2, q=1.0, method="auto"):
    """q-Wasserstein distance and the optimal matching.

    The matching is a list of (i, j) with i indexing ``d1`` and j indexing
    ``d2``; -1 on either side means the point went to the diagonal.
    ``method="hungarian"`` always solves the augmented assignment problem;
    ``"auto"`` switches to an exact O(mn) sweep when both diagrams lie on
    axis-parallel lines (all births equal, or all deaths equal).
    """
    if d1.dim != d2.dim:
        raise DimMismatch(f"dim {d1.dim} vs dim {d2.dim}")
    if q < 1:
        raise TomaError("Wasserstein exponent must be >= 1")
    if method not in ("auto", "hungarian", "line"):
        raise TomaError(f"unknown method {method!r}")
    p1, p2 = d1.points, d2.points
    m, n = len(p1), len(p2)
    if m + n == 0:
        return 0.0, []
    if method != "hungarian":
        k = _shared_constant_axis(p1, p2)
        if k is not None:
            total, matching = _line_matching(p1, p2, k, q)
            return total ** (1.0 / q), matching
        if method == "line":
            raise TomaError("diagrams do not share a constant coordinate")
    cost = augmented_cost(p1, p2, q)
    rows, cols = linear_sum_assignment(cost)
    total = float(cost[rows, cols].sum())
    matching = []
    for r, c in zip(rows, cols):
        if r < m and c < n:
            matching.append((int(r), int(c)))
        elif r < m:
            matching.append((int(r), -1))
        elif c < n:
            matching.append((-1, int(c)))
    return total ** (1.0 / q), matching


def wasserstein(d1, d2, q=1.0, method="auto"):
    """q-Wasserstein distance with L-infinity ground metric."""
    return wasserstein_matching(d1, d2, q, method)[0]


@dataclass(frozen=True)
class PersistenceImage:
    grid: np.ndarray
    bounds: tuple
    sigma: float

    @property
    def resolution(self):
        return self.grid.shape[0]

    def to_dict(self):
        return {
            "resolution": self.resolution,
            "bounds": [float(x) for x in self.bounds],
            "sigma": float(self.sigma),
            "grid": self.grid.tolist(),
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        raw = json.loads(text)
        grid = np.array(raw["grid"], dtype=float).reshape(raw["resolution"], raw["resolution"])
        return cls(grid, tuple(raw["bounds"]), raw["sigma"])


def default_sigma(diagram):
    pers = diagram.persistence
    top = float(pers.max()) if pers.size else 0.0
    return max(PI_SIGMA_FRACTION * top, PI_SIGMA_FLOOR)


def auto_bounds(diagram, sigma):
    """(birth_min, birth_max, pers_min, pers_max) with a 10% margin."""
    if len(diagram) == 0:
        return (0.0, 1.0, 0.0, 1.0)
    out = []
    for col in (diagram.points[:, 0], diagram.persistence):
        lo, hi = float(col.min()), float(col.max())
        span = hi - lo
        pad = PI_MARGIN * span if span > 0 else sigma
        out.extend([lo - pad, hi + pad])
    return tuple(out)


def _cell_centers(bounds, resolution):
    b0, b1, p0, p1 = bounds
    bx = b0 + (np.arange(resolution) + 0.5) * (b1 - b0) / resolution
    py = p0 + (np.arange(resolution) + 0.5) * (p1 - p0) / resolution
    return bx, py


def _kernels(diagram, resolution, sigma, bounds):
    bx, py = _cell_centers(bounds, resolution)
    births = diagram.points[:, 0]
    pers = diagram.persistence
    dx = bx[None, :] - births[:, None]
    dy = py[None, :] - pers[:, None]
    gx = np.exp(-(dx**2) / (2 * sigma**2))
    gy = np.exp(-(dy**2) / (2 * sigma**2))
    norm = 1.0 / (2 * np.pi * sigma**2)
    return pers, dx, dy, gx, gy, norm


def persistence_image(diagram, resolution=PI_RESOLUTION, sigma=None, bounds=None):
    """Sum of persistence-weighted Gaussians on a resolution x resolution grid.

    ``grid[r, c]`` sits at persistence-center r and birth-center c.
    """
    if resolution < 1:
        raise TomaError("resolution must be >= 1")
    sigma = default_sigma(diagram) if sigma is None else float(sigma)
    if not sigma > 0:
        raise TomaError("sigma must be positive")
    bounds = auto_bounds(diagram, sigma) if bounds is None else tuple(float(x) for x in bounds)
    if len(diagram) == 0:
        return PersistenceImage(np.zeros((resolution, resolution)), bounds, sigma)
    pers, _, _, gx, gy, norm = _kernels(diagram, resolution, sigma, bounds)
    # separable Gaussian: grid = sum_k w_k * gy_k (outer) gx_k
    grid = norm * np.einsum("k,kr,kc->rc", pers, gy, gx)
    return PersistenceImage(grid, bounds, sigma)


def persistence_image_vjp(diagram, image, upstream):
    """Gradient of sum(upstream * grid) with respect to (birth, death) of each point.

    ``bounds`` and ``sigma`` of ``image`` are held fixed.
    """
    if len(diagram) == 0:
        return np.zeros((0, 2))
    pers, dx, dy, gx, gy, norm = _kernels(diagram, image.resolution, image.sigma, image.bounds)
    s2 = image.sigma**2
    # F_k = sum_rc U[r,c] gy[k,r] gx[k,c]; derivatives via weighted variants
    ugx = gx @ upstream.T  # (k, r): sum_c U[r,c] gx[k,c]
    base = np.einsum("kr,kr->k", gy, ugx)
    d_birth_kernel = np.einsum("kr,kr->k", gy, (gx * dx / s2) @ upstream.T)
    d_pers_kernel = np.einsum("kr,kr->k", gy * dy / s2, ugx)
    g_birth = norm * pers * d_birth_kernel
    g_pers = norm * (base + pers * d_pers_kernel)
    # persistence = death - birth
    return np.stack([g_birth - g_pers, g_pers], axis=1)


def image_l2(p1, p2):
    if p1.grid.shape != p2.grid.shape or not np.allclose(p1.bounds, p2.bounds, rtol=0, atol=0):
        raise BoundsMismatch("persistence images differ in resolution or bounds")
    return float(np.linalg.norm(p1.grid - p2.grid))
