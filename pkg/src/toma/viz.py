"""Static SVG drawings of a cloud's MST and H1-birth edges."""
from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

POWER_ITERS = 200


def principal_directions(points, k=2, iters=POWER_ITERS):
    """Top-k principal directions by power iteration with deflation.

    Starts from a fixed vector so the output depends only on the input.
    Each direction's sign is fixed so its largest-magnitude entry is positive.
    """
    x = points - points.mean(axis=0)
    cov = x.T @ x
    d = cov.shape[0]
    dirs = []
    for j in range(min(k, d)):
        v = np.ones(d) / np.sqrt(d)
        v[j % d] += 1.0
        for _ in range(iters):
            for u in dirs:
                v = v - (v @ u) * u
            w = cov @ v
            nw = np.linalg.norm(w)
            if nw < 1e-300:
                break
            v = w / nw
        for u in dirs:
            v = v - (v @ u) * u
        nv = np.linalg.norm(v)
        v = v / nv if nv > 0 else np.eye(d)[j]
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        dirs.append(v)
    return np.array(dirs)


def project_2d(points):
    """2-D layout: the coordinates themselves for d <= 2, else a PCA-style projection."""
    d = points.shape[1]
    if d == 1:
        return np.column_stack([points[:, 0], np.zeros(len(points))]), None
    if d == 2:
        return points.copy(), None
    basis = principal_directions(points, 2)
    return (points - points.mean(axis=0)) @ basis.T, basis


@dataclass
class SvgScene:
    width: int = 480
    height: int = 480
    margin: int = 24
    circles: list = field(default_factory=list)
    lines: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    metadata: str = ""
    title: str = ""

    def render(self):
        out = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">',
            "<style>line.mst{stroke:#c0392b;stroke-width:2}line.mst.shared{stroke:#6d1a12;stroke-width:3}"
            "line.h1{stroke:#2e86c1;stroke-width:0.6;stroke-opacity:0.6}"
            "circle{fill:#222}text{font:9px sans-serif;fill:#444}</style>",
        ]
        if self.title:
            out.append(f"<title>{escape(self.title)}</title>")
        if self.metadata:
            out.append(f"<metadata>{escape(self.metadata)}</metadata>")
        for cls, (x1, y1), (x2, y2) in self.lines:
            out.append(f'<line class="{cls}" x1="{x1:.3f}" y1="{y1:.3f}" x2="{x2:.3f}" y2="{y2:.3f}"/>')
        for x, y in self.circles:
            out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="3"/>')
        for (x, y), text in self.labels:
            out.append(f'<text x="{x + 4:.3f}" y="{y - 4:.3f}">{escape(text)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"


def build_scene(points, ids, h0_edges, h1_edges, shared=(), width=480, height=480, title=""):
    """Scene for one cloud; ``shared`` holds MST edges present in both modalities."""
    xy, basis = project_2d(np.asarray(points, dtype=float))
    scene = SvgScene(width=width, height=height, title=title)
    lo, hi = xy.min(axis=0), xy.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    inner = np.array([width, height], dtype=float) - 2 * scene.margin
    pix = scene.margin + (xy - lo) / span * inner
    pix[:, 1] = height - pix[:, 1]  # y axis points up
    if basis is not None:
        rows = ";".join(",".join(repr(float(v)) for v in b) for b in basis)
        scene.metadata = f"projection=pca2 basis={rows}"
    else:
        scene.metadata = "projection=identity"
    shared = {frozenset(e) for e in shared}
    for a, b in h1_edges:
        scene.lines.append(("h1", tuple(pix[a]), tuple(pix[b])))
    for a, b in h0_edges:
        cls = "mst shared" if frozenset((a, b)) in shared else "mst"
        scene.lines.append((cls, tuple(pix[a]), tuple(pix[b])))
    for k, pid in enumerate(ids):
        scene.circles.append(tuple(pix[k]))
        scene.labels.append((tuple(pix[k]), str(int(pid))))
    return scene
