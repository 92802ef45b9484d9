"""Topology-aware alignment objectives.

Edge sets come from each cloud's own filtration (MST edges and the
cycle-closing remainder). The directional objective compares the direction
of every selected edge with the direction of the paired edge in the other
modality, in both directions.

Gradients treat the selected edge sets (and, for the diagram-based
variants, the optimal matchings and image bounds) as constant, which is
exact away from weight ties.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp, softmax

from .diagrams import (
    PersistenceDiagram,
    default_sigma,
    auto_bounds,
    persistence_image,
    persistence_image_vjp,
    wasserstein_matching,
)
from .errors import DegenerateEdge, LengthMismatch, PairingIncomplete, TomaError
from .filtration import Edge, PhOptions, edge_decomposition
from .geometry import PairingMap, PointCloud, pairwise_distances

VARIANTS = ("toma", "dist", "pd", "pi", "none")
KINDS = ("h0", "h1")


@dataclass
class AlignConfig:
    c: float = 0.5
    c2: float = 1.0
    use_abs: bool = True
    variant: str = "toma"
    skip_eps: float = 1e-12
    ph_opts: PhOptions = field(default_factory=PhOptions)
    metric: str = "euclidean"
    q: float = 1.0
    pi_resolution: int = 20
    pi_sigma: Optional[float] = None
    pi_bounds: Optional[tuple] = None

    def __post_init__(self):
        for name in ("c", "c2"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise TomaError(f"{name} must be finite and >= 0")
        if self.variant not in VARIANTS:
            raise TomaError(f"unknown variant {self.variant!r}")

    def to_dict(self):
        return asdict(self)


@dataclass
class Consistencies:
    """Per-edge directional consistencies, kept as arrays."""

    edges: np.ndarray
    weights: np.ndarray
    kinds: np.ndarray
    directions: np.ndarray
    values: np.ndarray

    def as_list(self):
        return [
            (Edge(int(a), int(b), float(w)), str(k), str(d), float(t))
            for (a, b), w, k, d, t in zip(self.edges, self.weights, self.kinds, self.directions, self.values)
        ]


@dataclass
class LossReport:
    loss_0death: float = 0.0
    loss_1birth: float = 0.0
    loss_contrastive: float = 0.0
    loss_total: float = 0.0
    skipped_edges: int = 0
    grads: Optional[tuple] = None
    consistencies: Optional[Consistencies] = None
    config: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def loss_topology(self):
        return self.loss_total - self.loss_contrastive

    def summary(self):
        return {
            "loss_0death": self.loss_0death,
            "loss_1birth": self.loss_1birth,
            "loss_contrastive": self.loss_contrastive,
            "loss_total": self.loss_total,
            "skipped_edges": self.skipped_edges,
        }

    def to_dict(self):
        out = self.summary()
        out["config"] = _jsonable(self.config)
        if self.extra:
            out["extra"] = _jsonable(self.extra)
        return out

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), indent=indent)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _points(cloud):
    return cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)


def _check_pairing(mi, mj, pairing):
    if pairing is None:
        if len(mi) != len(mj):
            raise LengthMismatch("clouds differ in size and no pairing was given")
        return PairingMap.identity(len(mi))
    if pairing.forward.size != len(mi) or pairing.backward.size != len(mj) or not pairing.is_complete():
        raise PairingIncomplete("pairing must cover every point of both clouds")
    return pairing


def directional_consistency(edge, source, target, pairing, skip_eps=1e-12):
    """Cosine between an edge's direction in ``source`` and its image in ``target``."""
    a, b = edge[0], edge[1]
    fa, fb = pairing.forward[a], pairing.forward[b]
    if fa < 0 or fb < 0:
        raise PairingIncomplete(f"edge ({a}, {b}) has an unpaired endpoint")
    u = _points(source)[a] - _points(source)[b]
    v = _points(target)[fa] - _points(target)[fb]
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu <= skip_eps or nv <= skip_eps:
        raise DegenerateEdge(f"edge ({a}, {b}) has a zero-length direction")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


class _Pair:
    """Two clouds expressed in a common index space (modality i's order).

    Gram products use centred copies; distances and PH use the raw points.
    """

    def __init__(self, mi, mj, pairing, cfg, restrict_to=None):
        self.pairing = pairing
        self.cfg = cfg
        self.active = None
        if restrict_to is not None:
            self.active = np.zeros(len(pairing.forward), dtype=bool)
            self.active[np.asarray(restrict_to, dtype=np.int64)] = True
        xi = _points(mi)
        xj = _points(mj)
        self.raw_i, self.raw_j = xi, xj
        self.X = xi - xi.mean(axis=0)
        self.Y = xj[pairing.forward] - xj.mean(axis=0)
        self.n = self.X.shape[0]
        self._dist = {}
        self._dec = {}

    def dist(self, side, metric):
        """Distance matrix of one side in its own index order."""
        key = (side, metric)
        if key not in self._dist:
            pts = self.raw_i if side == "i" else self.raw_j
            self._dist[key] = pairwise_distances(pts, metric)
        return self._dist[key]

    def decomposition(self, side):
        if side not in self._dec:
            self._dec[side] = edge_decomposition(self.dist(side, self.cfg.metric), self.cfg.ph_opts)
        return self._dec[side]

    def common_edges(self, side, kind):
        """Edges of one side's decomposition relabelled into common indices."""
        edges, weights = self.decomposition(side).edges(kind)
        if side == "j":
            edges = self.pairing.backward[edges]
        if self.active is not None:
            keep = self.active[edges[:, 0]] & self.active[edges[:, 1]]
            return edges[keep], weights[keep], keep
        return edges, weights, None

    def edge_lengths(self, edges):
        """Euclidean |u| (in X) and |v| (in Y) for common-index edges."""
        if edges.size == 0:
            return np.zeros(0), np.zeros(0)
        dx = self.dist("i", "euclidean")
        dyj = self.dist("j", "euclidean")
        fa, fb = self.pairing.forward[edges[:, 0]], self.pairing.forward[edges[:, 1]]
        return dx[edges[:, 0], edges[:, 1]], dyj[fa, fb]

    def edge_dots(self, edges, nu, nv):
        """u . v per edge via the cross Gram matrix, with exact fallback."""
        if edges.size == 0:
            return np.zeros(0)
        if not hasattr(self, "_gxy"):
            self._gxy = self.X @ self.Y.T
            self._scale = float(np.linalg.norm(self.X, axis=1).max() * np.linalg.norm(self.Y, axis=1).max())
        g = self._gxy
        a, b = edges[:, 0], edges[:, 1]
        dots = g[a, a] + g[b, b] - g[a, b] - g[b, a]
        # cancellation is significant when the edge is short relative to the cloud
        bad = nu * nv < 1e-4 * self._scale
        if bad.any():
            ab, bb = a[bad], b[bad]
            dots[bad] = np.einsum("kd,kd->k", self.X[ab] - self.X[bb], self.Y[ab] - self.Y[bb])
        return dots


def _coef_matrix(n, terms):
    """Symmetric N x N matrix accumulating per-edge coefficients."""
    m = np.zeros(n * n)
    for edges, coef in terms:
        m += np.bincount(edges[:, 0] * n + edges[:, 1], weights=coef, minlength=n * n)
    m = m.reshape(n, n)
    return m + m.T


def _laplacian(m):
    lap = -m
    lap[np.diag_indices_from(lap)] += m.sum(axis=1)
    return lap


def _weights(cfg):
    return {"h0": cfg.c / 2.0, "h1": cfg.c / 2.0 * cfg.c2}


def _edge_pass(pair, integrand, want_grad, record):
    """Shared driver for the two edge-based objectives.

    ``integrand(t_inputs)`` returns per-edge values and the coefficients
    (alpha, beta, gamma) of the gradient w.r.t. u and v, scaled by the
    per-edge upstream weight that the driver passes in.
    """
    cfg = pair.cfg
    n = pair.n
    per_kind = {}
    skipped = 0
    grad_terms = {"A": [], "B": [], "C": []}
    rec = {"edges": [], "weights": [], "kinds": [], "dirs": [], "vals": []}
    weights = _weights(cfg)
    for kind in KINDS:
        total = 0.0
        for side, tag in (("i", "i->j"), ("j", "j->i")):
            edges, w, kept = pair.common_edges(side, kind)
            nu, nv = pair.edge_lengths(edges)
            ok = (nu > cfg.skip_eps) & (nv > cfg.skip_eps)
            skipped += int((~ok).sum())
            edges, w, nu, nv = edges[ok], w[ok], nu[ok], nv[ok]
            if edges.shape[0] == 0:
                continue
            dots = pair.edge_dots(edges, nu, nv) if integrand.needs_dots else None
            vals, coefs = integrand(nu, nv, dots)
            total += float(vals.mean())
            if want_grad:
                scale = weights[kind] / edges.shape[0]
                for key, coef in zip("ABC", coefs):
                    if coef is not None:
                        grad_terms[key].append((edges, scale * coef))
            if record and integrand.needs_dots:
                src_edges, src_w = pair.decomposition(side).edges(kind)
                if kept is not None:
                    src_edges, src_w = src_edges[kept], src_w[kept]
                rec["edges"].append(src_edges[ok])
                rec["weights"].append(src_w[ok])
                rec["kinds"].append(np.full(edges.shape[0], kind))
                rec["dirs"].append(np.full(edges.shape[0], tag))
                rec["vals"].append(integrand.last_t)
        per_kind[kind] = total
    grads = None
    if want_grad:
        # sum_e coef_e (e_a - e_b)(p_a - p_b)^T == Laplacian(coef) @ P
        lap = {k: _laplacian(_coef_matrix(n, terms)) for k, terms in grad_terms.items() if terms}
        gx = np.zeros_like(pair.X)
        gy = np.zeros_like(pair.Y)
        if "A" in lap:
            gx += lap["A"] @ pair.Y
            gy += lap["A"] @ pair.X
        if "B" in lap:
            gx += lap["B"] @ pair.X
        if "C" in lap:
            gy += lap["C"] @ pair.Y
        gj = np.empty_like(gy)
        gj[pair.pairing.forward] = gy
        grads = (gx, gj)
    cons = None
    if record and rec["vals"]:
        cons = Consistencies(
            np.concatenate(rec["edges"]),
            np.concatenate(rec["weights"]),
            np.concatenate(rec["kinds"]),
            np.concatenate(rec["dirs"]),
            np.concatenate(rec["vals"]),
        )
    return per_kind, skipped, grads, cons


class _DirectionIntegrand:
    needs_dots = True

    def __init__(self, use_abs):
        self.use_abs = use_abs
        self.last_t = None

    def __call__(self, nu, nv, dots):
        t = np.clip(dots / (nu * nv), -1.0, 1.0)
        self.last_t = t
        if self.use_abs:
            vals = 1.0 - np.abs(t)
            dval = -np.sign(t)
        else:
            vals = 1.0 - t
            dval = -np.ones_like(t)
        # dT/du = v/(|u||v|) - T u/|u|^2, symmetric for v
        alpha = dval / (nu * nv)
        beta = -dval * t / nu**2
        gamma = -dval * t / nv**2
        return vals, (alpha, beta, gamma)


class _DistanceIntegrand:
    needs_dots = False
    last_t = None

    def __call__(self, nu, nv, dots):
        diff = nu - nv
        s = np.sign(diff)
        return np.abs(diff), (None, s / nu, -s / nv)


def _finish(per_kind, skipped, grads, cons, cfg, extra=None):
    l0, l1 = per_kind["h0"], per_kind["h1"]
    total = cfg.c / 2.0 * (l0 + cfg.c2 * l1)
    return LossReport(
        loss_0death=l0,
        loss_1birth=l1,
        loss_total=total,
        skipped_edges=skipped,
        grads=grads,
        consistencies=cons,
        config=cfg.to_dict(),
        extra=extra or {},
    )


def toma_loss(mi, mj, pairing=None, cfg=None, grad=False, record=False, restrict_to=None):
    """Bidirectional directional-consistency loss over H0-death and H1-birth edges.

    For each edge kind the loss is the mean of 1 - |T| over the source
    cloud's edges, summed over both directions; ``loss_total`` is
    ``c/2 * (loss_0death + c2 * loss_1birth)``.

    ``restrict_to`` (modality-i indices) keeps only edges whose two
    endpoints are in that set; PH is still computed on the full clouds.
    """
    cfg = cfg or AlignConfig()
    pairing = _check_pairing(mi, mj, pairing)
    pair = _Pair(mi, mj, pairing, cfg, restrict_to)
    per_kind, skipped, grads, cons = _edge_pass(pair, _DirectionIntegrand(cfg.use_abs), grad, record)
    return _finish(per_kind, skipped, grads, cons, cfg)


def toma_grad(mi, mj, pairing=None, cfg=None):
    """Gradients of ``toma_loss(...).loss_total`` with respect to both clouds.

    Unlike ``toma_loss``, which skips and counts zero-length edges, this
    refuses them: the derivative of a direction is undefined there.
    """
    report = toma_loss(mi, mj, pairing, cfg, grad=True)
    if report.skipped_edges:
        raise DegenerateEdge(f"{report.skipped_edges} selected edges have zero length")
    return report.grads


def dist_loss(mi, mj, pairing=None, cfg=None, grad=False, restrict_to=None):
    """Same edge selection as ``toma_loss`` with | |u| - |v| | as integrand."""
    cfg = cfg or AlignConfig(variant="dist")
    pairing = _check_pairing(mi, mj, pairing)
    pair = _Pair(mi, mj, pairing, cfg, restrict_to)
    per_kind, skipped, grads, _ = _edge_pass(pair, _DistanceIntegrand(), grad, False)
    return _finish(per_kind, skipped, grads, None, cfg)


# --- diagram-based variants ------------------------------------------------


class _CloudDiagrams:
    """PD0 and cap-substituted PD1 of one cloud, with coordinate provenance.

    Each diagram coordinate is either a constant or the length of a
    specific edge; ``prov`` holds, per point, an (edge_or_None, edge_or_None)
    pair for (birth, death).
    """

    def __init__(self, points, cfg):
        self.points = points
        self.cfg = cfg
        self.dist = pairwise_distances(points, cfg.metric)
        dec = edge_decomposition(self.dist, cfg.ph_opts)
        n = points.shape[0]
        if cfg.ph_opts.max_scale is not None:
            cap, cap_edge = float(cfg.ph_opts.max_scale), None
        elif n > 1:
            flat = int(np.argmax(np.triu(self.dist, 1)))
            cap_edge = (flat // n, flat % n)
            cap = float(self.dist[cap_edge])
        else:
            cap, cap_edge = 0.0, None
        self.diameter = cap
        h0 = dec.h0
        self.pd0 = PersistenceDiagram(0, np.stack([np.zeros(len(h0)), dec.h0_weights], axis=1))
        self.prov0 = [(None, (int(a), int(b))) for a, b in h0]
        h1 = dec.h1
        deaths = np.maximum(np.full(len(h1), cap), dec.h1_weights)
        self.pd1 = PersistenceDiagram(1, np.stack([dec.h1_weights, deaths], axis=1))
        self.prov1 = [((int(a), int(b)), cap_edge) for a, b in h1]

    def point_grad(self, prov, coord_grads):
        """Pull (k, 2) gradients on diagram coordinates back to the points."""
        edges, coefs = [], []
        for (eb, ed), (gb, gd) in zip(prov, coord_grads):
            if eb is not None and gb != 0:
                edges.append(eb)
                coefs.append(gb)
            if ed is not None and gd != 0:
                edges.append(ed)
                coefs.append(gd)
        return metric_edge_grad(self.points, edges, coefs, self.cfg.metric)


def metric_edge_grad(points, edges, coefs, metric="euclidean"):
    """Gradient of sum_e coef_e * dist(p_a, p_b) with respect to the points."""
    grad = np.zeros_like(points)
    if not edges:
        return grad
    e = np.asarray(edges, dtype=np.int64)
    c = np.asarray(coefs, dtype=float)
    pa, pb = points[e[:, 0]], points[e[:, 1]]
    if metric == "euclidean":
        u = pa - pb
        nu = np.linalg.norm(u, axis=1)
        nz = nu > 0
        ga = np.zeros_like(u)
        ga[nz] = (c[nz] / nu[nz])[:, None] * u[nz]
        gb = -ga
    else:
        na = np.linalg.norm(pa, axis=1)
        nb = np.linalg.norm(pb, axis=1)
        cos = np.einsum("kd,kd->k", pa, pb) / (na * nb)
        # d(1 - cos)/dp_a = -(p_b/(|a||b|) - cos p_a/|a|^2)
        ga = -c[:, None] * (pb / (na * nb)[:, None] - (cos / na**2)[:, None] * pa)
        gb = -c[:, None] * (pa / (na * nb)[:, None] - (cos / nb**2)[:, None] * pb)
    np.add.at(grad, e[:, 0], ga)
    np.add.at(grad, e[:, 1], gb)
    return grad


def _wasserstein_grads(d1, d2, q):
    """Value and coordinate gradients of W_q for a frozen optimal matching."""
    w, matching = wasserstein_matching(d1, d2, q)
    g1 = np.zeros((len(d1), 2))
    g2 = np.zeros((len(d2), 2))
    if w == 0:
        return w, g1, g2

    def dcost(c):
        return (c / w) ** (q - 1)

    for i, j in matching:
        if i >= 0 and j >= 0:
            diff = d1.points[i] - d2.points[j]
            k = int(np.argmax(np.abs(diff)))
            c = abs(diff[k])
            if c == 0:
                continue
            s = np.sign(diff[k]) * dcost(c)
            g1[i, k] += s
            g2[j, k] -= s
        elif i >= 0:
            b, d = d1.points[i]
            s = dcost((d - b) / 2.0) / 2.0
            g1[i] += (-s, s)
        else:
            b, d = d2.points[j]
            s = dcost((d - b) / 2.0) / 2.0
            g2[j] += (-s, s)
    return w, g1, g2


def pd_loss(mi, mj, cfg=None, grad=False):
    """Wasserstein distance between the clouds' diagrams, per dimension.

    H1 classes never die under the edge-truncated filtration, so each is
    compared as (birth, cap) with cap = ``max_scale`` if set, else the cloud
    diameter. The pairing map is deliberately not used.
    """
    cfg = cfg or AlignConfig(variant="pd")
    pi, pj = _points(mi), _points(mj)
    di, dj = _CloudDiagrams(pi, cfg), _CloudDiagrams(pj, cfg)
    per_kind = {}
    gi, gj = np.zeros_like(pi), np.zeros_like(pj)
    weights = _weights(cfg)
    for kind, a, b, pa, pb in (
        ("h0", di.pd0, dj.pd0, di.prov0, dj.prov0),
        ("h1", di.pd1, dj.pd1, di.prov1, dj.prov1),
    ):
        w, g1, g2 = _wasserstein_grads(a, b, cfg.q)
        per_kind[kind] = w
        if grad:
            gi += weights[kind] * di.point_grad(pa, g1)
            gj += weights[kind] * dj.point_grad(pb, g2)
    extra = {"h1_death_i": di.diameter, "h1_death_j": dj.diameter, "q": cfg.q}
    return _finish(per_kind, 0, (gi, gj) if grad else None, None, cfg, extra)


def pi_loss(mi, mj, cfg=None, grad=False):
    """L2 distance between persistence images, per dimension, on shared bounds."""
    cfg = cfg or AlignConfig(variant="pi")
    pi, pj = _points(mi), _points(mj)
    di, dj = _CloudDiagrams(pi, cfg), _CloudDiagrams(pj, cfg)
    per_kind = {}
    gi, gj = np.zeros_like(pi), np.zeros_like(pj)
    weights = _weights(cfg)
    extra = {"h1_death_i": di.diameter, "h1_death_j": dj.diameter, "resolution": cfg.pi_resolution}
    for kind, a, b, pa, pb in (
        ("h0", di.pd0, dj.pd0, di.prov0, dj.prov0),
        ("h1", di.pd1, dj.pd1, di.prov1, dj.prov1),
    ):
        both = a.union(b)
        sigma = default_sigma(both) if cfg.pi_sigma is None else cfg.pi_sigma
        bounds = auto_bounds(both, sigma) if cfg.pi_bounds is None else tuple(cfg.pi_bounds)
        ia = persistence_image(a, cfg.pi_resolution, sigma, bounds)
        ib = persistence_image(b, cfg.pi_resolution, sigma, bounds)
        diff = ia.grid - ib.grid
        val = float(np.linalg.norm(diff))
        per_kind[kind] = val
        extra[f"{kind}_sigma"] = sigma
        extra[f"{kind}_bounds"] = list(bounds)
        if grad and val > 0:
            up = diff / val
            gi += weights[kind] * di.point_grad(pa, persistence_image_vjp(a, ia, up))
            gj += weights[kind] * dj.point_grad(pb, persistence_image_vjp(b, ib, -up))
    return _finish(per_kind, 0, (gi, gj) if grad else None, None, cfg, extra)


def topology_loss(mi, mj, pairing=None, cfg=None, grad=False, restrict_to=None):
    """Dispatch on ``cfg.variant``; ``restrict_to`` only affects pairing-based variants."""
    cfg = cfg or AlignConfig()
    if cfg.variant == "toma":
        return toma_loss(mi, mj, pairing, cfg, grad=grad, restrict_to=restrict_to)
    if cfg.variant == "dist":
        return dist_loss(mi, mj, pairing, cfg, grad=grad, restrict_to=restrict_to)
    if cfg.variant == "pd":
        return pd_loss(mi, mj, cfg, grad=grad)
    if cfg.variant == "pi":
        return pi_loss(mi, mj, cfg, grad=grad)
    pi, pj = _points(mi), _points(mj)
    grads = (np.zeros_like(pi), np.zeros_like(pj)) if grad else None
    return LossReport(grads=grads, config=cfg.to_dict())


# --- contrastive -------------------------------------------------------------


def contrastive_loss(mi, mj, tau=1.0, grad=False):
    """Symmetric InfoNCE over cosine similarities; row k of each side is a pair.

    The gradient is taken with respect to the raw (unnormalised) rows.
    """
    x, y = _points(mi), _points(mj)
    if x.shape[0] != y.shape[0]:
        raise LengthMismatch(f"{x.shape[0]} vs {y.shape[0]} rows")
    n = x.shape[0]
    nx = np.linalg.norm(x, axis=1, keepdims=True)
    ny = np.linalg.norm(y, axis=1, keepdims=True)
    xn, yn = x / nx, y / ny
    s = xn @ yn.T / tau
    diag = np.trace(s)
    loss = (logsumexp(s, axis=1).sum() + logsumexp(s, axis=0).sum() - 2 * diag) / (2 * n)
    report = LossReport(loss_contrastive=float(loss), loss_total=float(loss), config={"tau": tau})
    if grad:
        ds = (softmax(s, axis=1) + softmax(s, axis=0)) / (2 * n)
        ds[np.diag_indices(n)] -= 1.0 / n
        gxn = ds @ yn / tau
        gyn = ds.T @ xn / tau
        gx = (gxn - np.sum(gxn * xn, axis=1, keepdims=True) * xn) / nx
        gy = (gyn - np.sum(gyn * yn, axis=1, keepdims=True) * yn) / ny
        report.grads = (gx, gy)
    return report
