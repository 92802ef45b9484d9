import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toma.alignment import toma_loss
from toma.datagen import GapSpec, SynthSpec, apply_gap, generate, make_rng, perturb_distinct
from toma.diagrams import PersistenceDiagram, wasserstein
from toma.errors import InvalidSpec
from toma.filtration import compute_mst, compute_ph
from toma.geometry import pairwise_distances
from toma.trainer import mst_overlap

from conftest import random_cloud


def diagrams(cloud):
    dist = pairwise_distances(cloud)
    pairs, _ = compute_ph(dist)
    d1 = PersistenceDiagram(1, np.array([(p.birth, dist.max()) for p in pairs if p.dim == 1]).reshape(-1, 2))
    return PersistenceDiagram.from_pairs(pairs, 0), d1


class TestGenerate:
    @pytest.mark.parametrize("structure", ["clusters", "circle", "two-clusters-plus-cycle"])
    def test_identity_gap(self, structure):
        mi, mj, pairing = generate(SynthSpec(n_points=20, dim=4, structure=structure, seed=1))
        assert np.array_equal(mi.points, mj.points)
        assert pairing.is_complete()
        assert toma_loss(mi, mj, pairing).loss_total == pytest.approx(0.0, abs=1e-9)

    def test_rotation_preserves_mst(self):
        spec = SynthSpec(n_points=30, dim=5, gap=GapSpec(angle=1.1, axes=(0, 3)), seed=2)
        mi, mj, p = generate(spec)
        assert not np.allclose(mi.points, mj.points)
        assert mst_overlap(mi, mj, p) == 1.0

    def test_circle_has_cycle(self):
        mi, _, _ = generate(SynthSpec(n_points=32, dim=2, structure="circle", radius=1.0, noise=0.0))
        pairs, dec = compute_ph(pairwise_distances(mi))
        assert len(dec.h1) >= 1
        side = 2 * np.sin(np.pi / 32)
        # the lightest non-tree edge is the last chord of length `side` that closes the ring
        assert dec.h1_weights[0] == pytest.approx(side, rel=1e-12)
        assert any(p.dim == 1 for p in pairs)

    def test_two_clusters_plus_cycle_layout(self):
        mi, _, _ = generate(SynthSpec(n_points=64, dim=16, noise=0.0, spread=0.1, seed=3))
        ring = mi.points[:32]
        np.testing.assert_allclose(np.linalg.norm(ring[:, 1:3], axis=1), 1.0, atol=1e-12)
        assert mi.points[32:48, 0].mean() == pytest.approx(2.5, abs=0.1)
        assert mi.points[48:, 0].mean() == pytest.approx(-2.5, abs=0.1)

    def test_deterministic(self):
        spec = SynthSpec(seed=9, gap=GapSpec(sigma=0.1, angle=0.5))
        a, b = generate(spec), generate(spec)
        assert np.array_equal(a[0].points, b[0].points) and np.array_equal(a[1].points, b[1].points)

    def test_seeds_differ(self):
        a = generate(SynthSpec(seed=1))[0].points
        b = generate(SynthSpec(seed=2))[0].points
        assert not np.array_equal(a, b)

    def test_rng_is_pcg64(self):
        assert isinstance(make_rng(0).bit_generator, np.random.PCG64)

    @given(st.floats(-np.pi, np.pi), st.integers(0, 1000))
    def test_rigid_gap_preserves_diagrams(self, angle, seed):
        spec = SynthSpec(n_points=12, dim=3, gap=GapSpec(angle=angle, axes=(0, 2), translation=[1.0, -2.0, 0.5], sign_flip=True), seed=seed)
        mi, mj, _ = generate(spec)
        for a, b in zip(diagrams(mi), diagrams(mj)):
            assert wasserstein(a, b) == pytest.approx(0.0, abs=1e-9)

    def test_gap_order(self):
        pts = np.array([[1.0, 0.0]])
        out = apply_gap(pts, GapSpec(angle=np.pi / 2, sign_flip=True, translation=[1.0]), make_rng(0))
        # rotate (1,0) -> (0,1), flip -> (0,-1), translate by 1 -> (1,0)
        np.testing.assert_allclose(out, [[1.0, 0.0]], atol=1e-15)

    def test_spec_json(self):
        spec = SynthSpec(n_points=10, gap=GapSpec(angle=0.3, axes=(1, 2), translation=[0.5]), seed=4)
        again = SynthSpec.from_dict(__import__("json").loads(spec.to_json()))
        assert again == spec

    @pytest.mark.parametrize(
        "kw",
        [
            {"n_points": 1},
            {"dim": 0},
            {"structure": "torus"},
            {"spread": -1.0},
            {"noise": -0.1},
            {"gap": GapSpec(sigma=-1.0)},
            {"gap": GapSpec(angle=0.1, axes=(0, 0))},
            {"gap": GapSpec(angle=0.1, axes=(0, 99))},
            {"gap": GapSpec(translation=[1.0, 2.0])},
            {"structure": "circle", "dim": 1},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(InvalidSpec):
            generate(SynthSpec(**kw))


class TestPerturbDistinct:
    def test_bounded_change(self):
        dist = pairwise_distances(random_cloud(0, 10, 3))
        out = perturb_distinct(dist, 1)
        bound = 1e-9 * dist[dist > 0].min()
        assert np.max(np.abs(out - dist)) <= bound
        assert np.array_equal(out, out.T) and np.all(np.diag(out) == 0)

    def test_ties_broken(self):
        dist = np.ones((4, 4)) - np.eye(4)
        out = perturb_distinct(dist, 0)
        vals = out[np.triu_indices(4, 1)]
        assert np.unique(vals).size == vals.size

    @pytest.mark.parametrize("seed", range(100))
    def test_mst_unchanged(self, seed):
        dist = pairwise_distances(random_cloud(seed, 20, 4))
        before = {(e.a, e.b) for e in compute_mst(dist)}
        after = {(e.a, e.b) for e in compute_mst(perturb_distinct(dist, seed))}
        assert before == after

    def test_deterministic(self):
        dist = np.ones((5, 5)) - np.eye(5)
        assert np.array_equal(perturb_distinct(dist, 3), perturb_distinct(dist, 3))
