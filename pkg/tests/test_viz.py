import xml.etree.ElementTree as ET

import numpy as np
from hypothesis import given, strategies as st

from toma.viz import build_scene, principal_directions, project_2d

SVG = "{http://www.w3.org/2000/svg}"


def test_principal_directions_match_eigh():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(50, 5)) * np.array([5.0, 3.0, 1.0, 0.5, 0.2])
    dirs = principal_directions(pts, 2)
    x = pts - pts.mean(axis=0)
    _, vecs = np.linalg.eigh(x.T @ x)
    for got, ref in zip(dirs, vecs[:, ::-1].T):
        assert abs(abs(got @ ref) - 1) < 1e-9


@given(st.integers(0, 10_000), st.integers(3, 9))
def test_principal_directions_orthonormal(seed, d):
    pts = np.random.default_rng(seed).normal(size=(20, d))
    dirs = principal_directions(pts, 2)
    np.testing.assert_allclose(dirs @ dirs.T, np.eye(2), atol=1e-9)
    for v in dirs:
        assert v[np.argmax(np.abs(v))] > 0


def test_principal_directions_deterministic():
    pts = np.random.default_rng(4).normal(size=(30, 6))
    assert np.array_equal(principal_directions(pts), principal_directions(pts.copy()))


def test_project_low_dim_is_identity():
    pts = np.array([[0.0, 1.0], [2.0, 3.0]])
    xy, basis = project_2d(pts)
    assert basis is None and np.array_equal(xy, pts)
    xy, _ = project_2d(np.array([[1.0], [2.0]]))
    assert np.array_equal(xy, [[1.0, 0.0], [2.0, 0.0]])


def test_scene_is_wellformed_svg():
    pts = np.random.default_rng(1).normal(size=(6, 4))
    scene = build_scene(pts, np.arange(10, 16), [(0, 1), (1, 2)], [(0, 2)], shared=[(1, 0)], title="a < b")
    root = ET.fromstring(scene.render())
    lines = root.findall(f"{SVG}line")
    assert [ln.get("class") for ln in lines] == ["h1", "mst shared", "mst"]
    assert len(root.findall(f"{SVG}circle")) == 6
    assert [t.text for t in root.findall(f"{SVG}text")] == [str(k) for k in range(10, 16)]
    assert root.find(f"{SVG}title").text == "a < b"
    assert root.find(f"{SVG}metadata").text.startswith("projection=pca2 basis=")


def test_scene_inside_canvas():
    pts = np.random.default_rng(2).normal(size=(12, 2)) * 100
    scene = build_scene(pts, np.arange(12), [], [])
    xy = np.array(scene.circles)
    assert xy.min() >= scene.margin - 1e-9
    assert xy.max() <= scene.width - scene.margin + 1e-9


def test_single_point_scene():
    scene = build_scene(np.zeros((1, 3)), [7], [], [])
    ET.fromstring(scene.render())
