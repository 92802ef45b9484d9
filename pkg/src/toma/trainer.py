"""Gradient-descent trainer for the combined contrastive + topology objective,
plus the cross-modal agreement metrics used to evaluate it."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .alignment import AlignConfig, LossReport, contrastive_loss, topology_loss
from .datagen import GapSpec, SynthSpec, generate, make_rng
from .errors import NonFiniteLoss, PairingIncomplete, TomaError
from .filtration import compute_mst
from .geometry import PairingMap, PointCloud, pairwise_distances

OPTIMIZERS = ("free-points", "linear-map")
PAIRED_VARIANTS = ("toma", "dist")


@dataclass
class TrainConfig:
    steps: int = 300
    learning_rate: float = 0.05
    align: AlignConfig = field(default_factory=AlignConfig)
    tau: float = 1.0
    labeled_fraction: float = 1.0
    seed: int = 0
    optimize: str = "linear-map"
    momentum: float = 0.0
    groups: Optional[list] = None

    def __post_init__(self):
        if self.steps < 0:
            raise TomaError("steps must be >= 0")
        if not self.learning_rate > 0:
            raise TomaError("learning_rate must be > 0")
        if not 0 < self.labeled_fraction <= 1:
            raise TomaError("labeled_fraction must be in (0, 1]")
        if self.optimize not in OPTIMIZERS:
            raise TomaError(f"unknown optimize mode {self.optimize!r}")

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainResult:
    loss_history: list
    final_clouds: tuple
    initial_clouds: tuple
    metrics: dict
    labeled: np.ndarray

    def to_dict(self):
        return {
            "loss_history": self.loss_history,
            "metrics": self.metrics,
            "labeled": self.labeled.tolist(),
        }

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), indent=indent)


def labeled_indices(n, cfg):
    """Deterministic labeled subset of modality-i indices, sorted."""
    if cfg.labeled_fraction >= 1:
        return np.arange(n)
    k = max(2, int(round(cfg.labeled_fraction * n)))
    rng = make_rng([cfg.seed, 1])
    return np.sort(rng.choice(n, size=min(k, n), replace=False))


def _pts(cloud):
    return cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)


def combined_objective(mi, mj, pairing, cfg, labeled=None, grad=True):
    """Contrastive loss on labeled pairs plus the configured topology term.

    The topology term computes PH on the full clouds; pairing-based variants
    then score only edges whose endpoints are both labeled. With
    ``cfg.groups`` the batch is split by group first and the topology term
    is averaged over groups.
    """
    x, y = _pts(mi), _pts(mj)
    n = x.shape[0]
    if labeled is None:
        labeled = labeled_indices(n, cfg)
    labeled = np.asarray(labeled, dtype=np.int64)
    if not pairing.is_complete():
        raise PairingIncomplete("the trainer needs a complete pairing")
    fw = pairing.forward
    partners = fw[labeled]
    con = contrastive_loss(x[labeled], y[partners], cfg.tau, grad=grad)

    acfg = cfg.align
    groups = [None] if cfg.groups is None else sorted(set(cfg.groups))
    is_labeled = np.zeros(n, dtype=bool)
    is_labeled[labeled] = True
    gx, gy = np.zeros_like(x), np.zeros_like(y)
    l0 = l1 = top = 0.0
    skipped = 0
    active = acfg.c > 0 and acfg.variant != "none"
    for g in groups if active else ():
        idx_i = np.arange(n) if g is None else np.flatnonzero(np.asarray(cfg.groups) == g)
        idx_j = fw[idx_i]
        restrict = np.flatnonzero(is_labeled[idx_i]) if acfg.variant in PAIRED_VARIANTS else None
        rep = topology_loss(x[idx_i], y[idx_j], None, acfg, grad=grad, restrict_to=restrict)
        l0 += rep.loss_0death / len(groups)
        l1 += rep.loss_1birth / len(groups)
        top += rep.loss_total / len(groups)
        skipped += rep.skipped_edges
        if grad:
            gx[idx_i] += rep.grads[0] / len(groups)
            gy[idx_j] += rep.grads[1] / len(groups)
    report = LossReport(
        loss_0death=l0,
        loss_1birth=l1,
        loss_contrastive=con.loss_contrastive,
        loss_total=con.loss_contrastive + top,
        skipped_edges=skipped,
        config={"align": acfg.to_dict(), "tau": cfg.tau, "labeled": int(labeled.size)},
    )
    if grad:
        gx[labeled] += con.grads[0]
        gy[partners] += con.grads[1]
        report.grads = (gx, gy)
    return report


def mst_overlap(mi, mj, pairing=None, metric="euclidean"):
    """Jaccard index of the two MST edge sets, j's edges carried into i's indices."""
    x, y = _pts(mi), _pts(mj)
    if pairing is None:
        pairing = PairingMap.identity(x.shape[0])
    if not pairing.is_complete():
        raise PairingIncomplete("mst_overlap needs a complete pairing")
    ti = {frozenset((e.a, e.b)) for e in compute_mst(pairwise_distances(x, metric))}
    bw = pairing.backward
    tj = {frozenset((int(bw[e.a]), int(bw[e.b]))) for e in compute_mst(pairwise_distances(y, metric))}
    union = ti | tj
    if not union:
        return 1.0
    return len(ti & tj) / len(union)


def retrieval_recall(mi, mj, pairing=None, k=1):
    """Fraction of paired i-points whose partner is among their k most cosine-similar j-points."""
    x, y = _pts(mi), _pts(mj)
    if pairing is None:
        pairing = PairingMap.identity(x.shape[0])
    xn = x / np.linalg.norm(x, axis=1, keepdims=True)
    yn = y / np.linalg.norm(y, axis=1, keepdims=True)
    sims = xn @ yn.T
    rows = pairing.covered
    if rows.size == 0:
        return 0.0
    # stable sort on -sim puts equal similarities in index order
    order = np.argsort(-sims[rows], axis=1, kind="stable")[:, :k]
    hits = order == pairing.forward[rows][:, None]
    return float(hits.any(axis=1).mean())


def evaluate(mi, mj, pairing, metric="euclidean"):
    n = len(_pts(mi))
    return {
        "mst_overlap": mst_overlap(mi, mj, pairing, metric),
        "retrieval_r1": retrieval_recall(mi, mj, pairing, 1),
        "retrieval_r5": retrieval_recall(mi, mj, pairing, min(5, n)),
    }


def _normalize_rows(z):
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    return z / norms, norms


def _through_normalize(g, e, norms):
    """Pull a gradient on e = z / |z| back to z."""
    return (g - np.sum(g * e, axis=1, keepdims=True) * e) / norms


def train(data, cfg):
    """Plain (optionally momentum) gradient descent on the combined objective.

    ``data`` is ``(mi, mj, pairing)``. In free-points mode the normalised
    points themselves are optimised and re-projected to the unit sphere
    after each step; in linear-map mode each modality learns a d x d map
    (initialised to identity) applied to its fixed base features, followed
    by row normalisation.
    """
    mi, mj, pairing = data
    base_i, base_j = _pts(mi), _pts(mj)
    n = base_i.shape[0]
    labeled = labeled_indices(n, cfg)
    metric = cfg.align.metric

    if cfg.optimize == "free-points":
        params = [_normalize_rows(base_i)[0], _normalize_rows(base_j)[0]]
    else:
        params = [np.eye(base_i.shape[1]), np.eye(base_j.shape[1])]
    velocity = [np.zeros_like(p) for p in params]

    def embed():
        if cfg.optimize == "free-points":
            return params[0], params[1], None
        ei, ni = _normalize_rows(base_i @ params[0])
        ej, nj = _normalize_rows(base_j @ params[1])
        return ei, ej, (ni, nj)

    ei, ej, _ = embed()
    initial = (ei.copy(), ej.copy())
    start = evaluate(ei, ej, pairing, metric)
    history = []
    for step in range(cfg.steps + 1):
        ei, ej, norms = embed()
        rep = combined_objective(ei, ej, pairing, cfg, labeled=labeled, grad=step < cfg.steps)
        if not math.isfinite(rep.loss_total):
            raise NonFiniteLoss(step, rep.loss_total)
        history.append({"step": step, **rep.summary()})
        if step == cfg.steps:
            break
        gi, gj = rep.grads
        if cfg.optimize == "linear-map":
            gi = base_i.T @ _through_normalize(gi, ei, norms[0])
            gj = base_j.T @ _through_normalize(gj, ej, norms[1])
        for k, g in enumerate((gi, gj)):
            velocity[k] = cfg.momentum * velocity[k] + g
            params[k] = params[k] - cfg.learning_rate * velocity[k]
        if cfg.optimize == "free-points":
            params = [_normalize_rows(p)[0] for p in params]
    ei, ej, _ = embed()
    end = evaluate(ei, ej, pairing, metric)
    return TrainResult(
        loss_history=history,
        final_clouds=(PointCloud(ei, _ids(mi, n)), PointCloud(ej, _ids(mj, n))),
        initial_clouds=(PointCloud(initial[0], _ids(mi, n)), PointCloud(initial[1], _ids(mj, n))),
        metrics={"start": start, "end": end},
        labeled=labeled,
    )


def _ids(cloud, n):
    return cloud.ids if isinstance(cloud, PointCloud) else np.arange(n)


# --- standard benchmark -------------------------------------------------------


def benchmark_spec(seed=0, n_points=64, dim=16):
    """The two-clusters-plus-cycle benchmark used for the trainer comparison."""
    return SynthSpec(
        n_points=n_points,
        dim=dim,
        structure="two-clusters-plus-cycle",
        spread=0.3,
        radius=1.0,
        noise=0.05,
        gap=GapSpec(angle=np.pi / 3, axes=(0, 1), sigma=0.2, translation=[0.5]),
        seed=seed,
    )


def benchmark_config(c=0.5, variant="toma", seed=0, steps=300, **kw):
    align = kw.pop("align", None) or AlignConfig(c=c, variant=variant)
    return TrainConfig(steps=steps, align=align, labeled_fraction=kw.pop("labeled_fraction", 0.5), seed=seed, **kw)


def _topology_grad_norm(data, cfg):
    mi, mj, pairing = data
    x, _ = _normalize_rows(_pts(mi))
    y, _ = _normalize_rows(_pts(mj))
    full = combined_objective(x, y, pairing, cfg)
    base = combined_objective(x, y, pairing, replace(cfg, align=replace(cfg.align, c=0.0)))
    return float(np.sqrt(sum(np.sum((g - h) ** 2) for g, h in zip(full.grads, base.grads))))


def matched_coefficient(data, variant, c, **kw):
    """Coefficient for ``variant`` whose topology gradient at the initial
    embedding has the same norm as the ToMA term's at coefficient ``c``.

    pd and pi losses are sums over diagram points or pixels, so at a shared
    c their gradients can be orders of magnitude larger than ToMA's means.
    """
    if c == 0 or variant in ("none", "toma"):
        return c
    ref = _topology_grad_norm(data, benchmark_config(c=c, variant="toma", steps=0, **kw))
    own = _topology_grad_norm(data, benchmark_config(c=c, variant=variant, steps=0, **kw))
    return c if own == 0 else c * ref / own


def run_benchmark(c=0.5, variant="toma", seeds=range(10), steps=300, spec_kw=None, **kw):
    """Train one arm over a seed sweep; returns per-seed end metrics."""
    rows = []
    for seed in seeds:
        data = generate(benchmark_spec(seed, **(spec_kw or {})))
        res = train(data, benchmark_config(c=c, variant=variant, seed=seed, steps=steps, **kw))
        rows.append({"seed": seed, **res.metrics["end"], "start": res.metrics["start"]})
    return rows
