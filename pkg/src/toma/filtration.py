"""Persistent homology of the Vietoris-Rips filtration truncated at edges.

Vertices enter at scale 0 and an edge {a, b} enters at d(a, b); nothing of
higher dimension ever enters. Under that filtration every H0 class dies at
an edge of the minimum spanning tree and every remaining edge gives birth to
an H1 class that never dies.

All edge orderings use the total order (weight, a, b) with a < b, which
makes the minimum spanning tree unique even when weights tie.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from .errors import InvalidMatrix, TooLarge

BRUTE_FORCE_MAX_N = 12


class Edge(NamedTuple):
    a: int
    b: int
    weight: float


@dataclass(frozen=True)
class PersistencePair:
    dim: int
    birth: float
    death: float
    birth_simplex: Union[int, Edge]
    death_simplex: Optional[Edge] = None

    @property
    def essential(self):
        return math.isinf(self.death)


@dataclass(frozen=True)
class PhOptions:
    max_scale: Optional[float] = None
    h1_cap: Optional[int] = None

    def __post_init__(self):
        if self.max_scale is not None and not self.max_scale > 0:
            raise ValueError("max_scale must be positive")
        if self.h1_cap is not None and self.h1_cap < 0:
            raise ValueError("h1_cap must be non-negative")


@dataclass
class EdgeDecomposition:
    """H0-death edges (the MST, or a forest under a scale cap) and H1-birth edges.

    Edges are stored as ``(k, 2)`` index arrays with matching weight arrays,
    each sorted by (weight, a, b).
    """

    h0: np.ndarray
    h0_weights: np.ndarray
    h1: np.ndarray
    h1_weights: np.ndarray
    essential_h0: list

    @property
    def h0_death_edges(self):
        return [Edge(int(a), int(b), float(w)) for (a, b), w in zip(self.h0, self.h0_weights)]

    @property
    def h1_birth_edges(self):
        return [Edge(int(a), int(b), float(w)) for (a, b), w in zip(self.h1, self.h1_weights)]

    def edges(self, kind):
        if kind == "h0":
            return self.h0, self.h0_weights
        if kind == "h1":
            return self.h1, self.h1_weights
        raise ValueError(kind)


def check_distance_matrix(dist):
    dist = np.asarray(dist, dtype=float)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1] or dist.shape[0] < 1:
        raise InvalidMatrix("distance matrix must be square and non-empty")
    if not np.all(np.isfinite(dist)):
        raise InvalidMatrix("distance matrix has non-finite entries")
    if np.any(dist < 0):
        raise InvalidMatrix("distance matrix has negative entries")
    if not np.array_equal(dist, dist.T):
        raise InvalidMatrix("distance matrix is not symmetric")
    if np.any(np.diag(dist) != 0):
        raise InvalidMatrix("distance matrix has a nonzero diagonal")
    return dist


def sorted_edges(dist):
    """All upper-triangle edges as (a, b, w) arrays in (weight, a, b) order."""
    n = dist.shape[0]
    a, b = np.triu_indices(n, 1)
    w = dist[a, b]
    # triu_indices is already (a, b)-lexicographic, so a stable weight sort suffices
    order = np.argsort(w, kind="stable")
    return a[order], b[order], w[order]


def _cap(edges, weights, max_scale, cap=None):
    if max_scale is not None:
        keep = weights <= max_scale
        edges, weights = edges[keep], weights[keep]
    if cap is not None:
        edges, weights = edges[:cap], weights[:cap]
    return edges, weights


def _sort_edge_array(edges, weights):
    order = np.lexsort((edges[:, 1], edges[:, 0], weights))
    return edges[order], weights[order]


def compute_mst(dist):
    """Minimum spanning tree as a list of Edge sorted by (weight, a, b).

    Prim's algorithm on the dense matrix, comparing candidate edges by the
    full (weight, a, b) key so ties resolve exactly as Kruskal would.
    """
    tree, weights = _prim(np.asarray(dist, dtype=float))
    return [Edge(int(a), int(b), float(w)) for (a, b), w in zip(tree, weights)]


def _prim(dist):
    n = dist.shape[0]
    if n == 1:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0)
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best_w = dist[0].astype(float, copy=True)
    best_u = np.zeros(n, dtype=np.int64)
    best_w[0] = np.inf
    idx = np.arange(n)
    tree = np.empty((n - 1, 2), dtype=np.int64)
    weights = np.empty(n - 1)
    for step in range(n - 1):
        m = best_w.min()
        ties = np.flatnonzero(best_w == m)
        if ties.size > 1:
            lo = np.minimum(best_u[ties], ties)
            hi = np.maximum(best_u[ties], ties)
            v = ties[np.lexsort((hi, lo))[0]]
        else:
            v = ties[0]
        u = best_u[v]
        tree[step] = (min(u, v), max(u, v))
        weights[step] = m
        in_tree[v] = True
        best_w[v] = np.inf
        row = dist[v]
        tie = row == best_w
        if tie.any():
            # same weight: keep the lexicographically smaller edge key
            new_lo, new_hi = np.minimum(v, idx), np.maximum(v, idx)
            old_lo, old_hi = np.minimum(best_u, idx), np.maximum(best_u, idx)
            tie &= (new_lo < old_lo) | ((new_lo == old_lo) & (new_hi < old_hi))
        better = ((row < best_w) | tie) & ~in_tree
        best_w[better] = row[better]
        best_u[better] = v
    return _sort_edge_array(tree, weights)


def edge_decomposition(dist, opts=None):
    """Split all edges into H0-death and H1-birth sets without building pairs.

    Vectorised path used by the losses; agrees with ``compute_ph``.
    """
    opts = opts or PhOptions()
    n = dist.shape[0]
    tree, tree_w = _prim(dist)
    in_tree = np.zeros((n, n), dtype=bool)
    in_tree[tree[:, 0], tree[:, 1]] = True
    a, b, w = sorted_edges(dist)
    rest = ~in_tree[a, b]
    h1 = np.stack([a[rest], b[rest]], axis=1)
    h1_w = w[rest]
    h0, h0_w = _cap(tree, tree_w, opts.max_scale)
    h1, h1_w = _cap(h1, h1_w, opts.max_scale, opts.h1_cap)
    essential = [0] if len(h0) == n - 1 else _components(n, h0)
    return EdgeDecomposition(h0, h0_w, h1, h1_w, essential)


def _components(n, edges):
    """Smallest vertex of each connected component, ascending."""
    parent = list(range(n))
    for a, b in edges:
        ra, rb = _find(parent, int(a)), _find(parent, int(b))
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return sorted({_find(parent, v) for v in range(n)})


def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def compute_ph(dist, opts=None):
    """Persistence pairs and edge decomposition via union-find (Kruskal order).

    Every component is represented by its smallest vertex. When two
    components merge, the one with the larger representative dies
    (elder rule with all births at 0).
    """
    opts = opts or PhOptions()
    dist = check_distance_matrix(dist)
    n = dist.shape[0]
    a_s, b_s, w_s = sorted_edges(dist)
    parent = list(range(n))
    h0_pairs, h1_edges = [], []
    for a, b, w in zip(a_s.tolist(), b_s.tolist(), w_s.tolist()):
        if opts.max_scale is not None and w > opts.max_scale:
            break
        ra, rb = _find(parent, a), _find(parent, b)
        if ra == rb:
            h1_edges.append(Edge(a, b, w))
            continue
        young, old = max(ra, rb), min(ra, rb)
        parent[young] = old
        h0_pairs.append(PersistencePair(0, 0.0, w, young, Edge(a, b, w)))
    roots = sorted({_find(parent, v) for v in range(n)})
    essential = [PersistencePair(0, 0.0, math.inf, r) for r in roots]
    if opts.h1_cap is not None:
        h1_edges = h1_edges[: opts.h1_cap]
    h1_pairs = [PersistencePair(1, e.weight, math.inf, e) for e in h1_edges]
    pairs = h0_pairs + essential + h1_pairs
    return pairs, decompose_edges(pairs, opts)


def brute_force_ph(dist):
    """Reference PH by direct simulation of the filtration (N <= 12).

    Each vertex carries an explicit component label; a merge relabels the
    dying component wholesale. No union-find, no spanning-tree shortcut.
    """
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise TooLarge(f"brute force PH is limited to N <= {BRUTE_FORCE_MAX_N}, got {n}")
    edges = []
    for a in range(n):
        for b in range(a + 1, n):
            edges.append((float(dist[a, b]), a, b))
    edges.sort()
    label = list(range(n))
    pairs = []
    for w, a, b in edges:
        la, lb = label[a], label[b]
        if la == lb:
            pairs.append(PersistencePair(1, w, math.inf, Edge(a, b, w)))
            continue
        members_a = [v for v in range(n) if label[v] == la]
        members_b = [v for v in range(n) if label[v] == lb]
        rep_a, rep_b = min(members_a), min(members_b)
        dying, survivor = (members_b, rep_a) if rep_b > rep_a else (members_a, rep_b)
        pairs.append(PersistencePair(0, 0.0, w, min(dying), Edge(a, b, w)))
        for v in dying:
            label[v] = survivor
    for rep in sorted(set(label)):
        pairs.append(PersistencePair(0, 0.0, math.inf, rep))
    return pairs


def decompose_edges(pairs, opts=None):
    """Collect H0-death and H1-birth edges from a list of pairs."""
    opts = opts or PhOptions()
    h0 = [p.death_simplex for p in pairs if p.dim == 0 and p.death_simplex is not None]
    h1 = [p.birth_simplex for p in pairs if p.dim == 1]
    essential = sorted(p.birth_simplex for p in pairs if p.dim == 0 and p.essential)

    def arrays(edges):
        if not edges:
            return np.zeros((0, 2), dtype=np.int64), np.zeros(0)
        e = np.array([(x.a, x.b) for x in edges], dtype=np.int64)
        w = np.array([x.weight for x in edges], dtype=float)
        return _sort_edge_array(e, w)

    h0_e, h0_w = _cap(*arrays(h0), opts.max_scale)
    h1_e, h1_w = _cap(*arrays(h1), opts.max_scale, opts.h1_cap)
    return EdgeDecomposition(h0_e, h0_w, h1_e, h1_w, essential)


def diagram_values(pairs, dim, finite_only=True):
    """(k, 2) array of (birth, death) for one dimension."""
    pts = [(p.birth, p.death) for p in pairs if p.dim == dim and not (finite_only and p.essential)]
    return np.array(pts, dtype=float).reshape(-1, 2)


def _num(x):
    return None if math.isinf(x) else x


def diagram_to_dict(pairs, decomposition):
    return {
        "dim0": [[p.birth, p.death] for p in pairs if p.dim == 0 and not p.essential],
        "dim0_essential": [[p.birth, None] for p in pairs if p.dim == 0 and p.essential],
        "dim1": [[p.birth, _num(p.death)] for p in pairs if p.dim == 1],
        "h0_edges": [[e.a, e.b, e.weight] for e in decomposition.h0_death_edges],
        "h1_edges": [[e.a, e.b, e.weight] for e in decomposition.h1_birth_edges],
    }


def diagram_to_json(pairs, decomposition, indent=None):
    return json.dumps(diagram_to_dict(pairs, decomposition), indent=indent)


def diagram_from_json(text):
    """Parse diagram JSON back into plain Python lists with ``inf`` restored."""
    raw = json.loads(text)

    def inf(v):
        return math.inf if v is None else float(v)

    return {
        "dim0": [(float(b), inf(d)) for b, d in raw["dim0"]],
        "dim0_essential": [(float(b), inf(d)) for b, d in raw["dim0_essential"]],
        "dim1": [(float(b), inf(d)) for b, d in raw["dim1"]],
        "h0_edges": [Edge(int(a), int(b), float(w)) for a, b, w in raw["h0_edges"]],
        "h1_edges": [Edge(int(a), int(b), float(w)) for a, b, w in raw["h1_edges"]],
    }
