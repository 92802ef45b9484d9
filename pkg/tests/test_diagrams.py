import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toma.diagrams import (
    PersistenceDiagram,
    PersistenceImage,
    augmented_cost,
    auto_bounds,
    default_sigma,
    image_l2,
    persistence_image,
    persistence_image_vjp,
    wasserstein,
    wasserstein_matching,
)
from toma.errors import BoundsMismatch, DimMismatch, TomaError
from toma.filtration import compute_ph


def diag(points, dim=0):
    return PersistenceDiagram(dim, np.array(points, dtype=float).reshape(-1, 2))


def random_diagram(rng, k, dim=0):
    b = rng.random(k)
    return diag(np.stack([b, b + rng.random(k)], axis=1), dim)


def exhaustive_w(p1, p2, q=1.0):
    """Enumerate every partial matching; unmatched points go to the diagonal."""
    m, n = len(p1), len(p2)
    to_diag = lambda p: ((p[1] - p[0]) / 2) ** q
    best = math.inf
    for r in range(min(m, n) + 1):
        for rows in itertools.combinations(range(m), r):
            for cols in itertools.permutations(range(n), r):
                cost = sum(max(abs(p1[i][0] - p2[j][0]), abs(p1[i][1] - p2[j][1])) ** q for i, j in zip(rows, cols))
                cost += sum(to_diag(p1[i]) for i in range(m) if i not in rows)
                cost += sum(to_diag(p2[j]) for j in range(n) if j not in cols)
                best = min(best, cost)
    return best ** (1 / q)


diagrams = st.integers(0, 8).flatmap(
    lambda k: st.lists(
        st.tuples(st.floats(0, 5, allow_nan=False), st.floats(0, 5, allow_nan=False)), min_size=k, max_size=k
    )
).map(lambda pts: diag([(b, b + p) for b, p in pts]))


class TestDiagram:
    def test_rejects_inverted(self):
        with pytest.raises(TomaError):
            diag([(1.0, 0.5)])

    def test_rejects_infinite(self):
        with pytest.raises(TomaError):
            diag([(0.0, math.inf)])

    def test_from_pairs_drops_essential(self):
        pairs, _ = compute_ph(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert diag_points(PersistenceDiagram.from_pairs(pairs, 0)) == [(0.0, 1.0)]
        with_cap = PersistenceDiagram.from_pairs(pairs, 0, essential_death=5.0)
        assert diag_points(with_cap) == [(0.0, 1.0), (0.0, 5.0)]


def diag_points(d):
    return [tuple(p) for p in d.points.tolist()]


class TestWasserstein:
    def test_identical(self):
        d = diag([(0, 1), (0.5, 2)])
        assert wasserstein(d, d) == 0.0

    def test_to_empty(self):
        assert wasserstein(diag([(0, 2)]), diag([])) == 1.0

    def test_duplicate_vs_single(self):
        # all matchings of the 3 x 3 augmented problem: best sends one copy to the diagonal
        assert wasserstein(diag([(0, 1), (0, 1)]), diag([(0, 1)])) == 0.5
        assert exhaustive_w([(0, 1), (0, 1)], [(0, 1)]) == 0.5

    def test_both_empty(self):
        assert wasserstein(diag([]), diag([])) == 0.0

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            wasserstein(diag([], 0), diag([], 1))

    def test_bad_q(self):
        with pytest.raises(TomaError):
            wasserstein(diag([]), diag([]), q=0.5)

    def test_q2(self):
        d1, d2 = diag([(0, 2)]), diag([(0, 4)])
        # matching costs 2^2 = 4; both to the diagonal costs 1 + 4 = 5
        assert math.isclose(wasserstein(d1, d2, q=2), 2.0)

    def test_matching_is_complete(self):
        rng = np.random.default_rng(0)
        d1, d2 = random_diagram(rng, 5), random_diagram(rng, 3)
        _, matching = wasserstein_matching(d1, d2)
        assert sorted(i for i, _ in matching if i >= 0) == list(range(5))
        assert sorted(j for _, j in matching if j >= 0) == list(range(3))

    def test_augmented_cost_shape(self):
        c = augmented_cost(np.array([[0.0, 2.0]]), np.zeros((0, 2)))
        assert c.tolist() == [[1.0]]

    @pytest.mark.parametrize("seed", range(50))
    def test_hungarian_equals_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        d1 = random_diagram(rng, int(rng.integers(0, 5)))
        d2 = random_diagram(rng, int(rng.integers(0, 5)))
        q = 1.0 if seed % 2 == 0 else 2.0
        want = exhaustive_w(d1.points.tolist(), d2.points.tolist(), q)
        assert math.isclose(wasserstein(d1, d2, q, method="hungarian"), want, rel_tol=1e-12, abs_tol=1e-12)

    @given(diagrams, diagrams)
    def test_symmetric(self, a, b):
        assert abs(wasserstein(a, b) - wasserstein(b, a)) <= 1e-12

    @given(diagrams, diagrams, diagrams)
    def test_triangle(self, a, b, c):
        assert wasserstein(a, c) <= wasserstein(a, b) + wasserstein(b, c) + 1e-9

    @given(diagrams, st.floats(0, 5, allow_nan=False))
    def test_diagonal_point_is_free(self, d, x):
        assert wasserstein(d, d.union(diag([(x, x)]))) == 0.0


class TestLineMatching:
    """The exact O(mn) sweep for diagrams on axis-parallel lines against the assignment solver."""

    @pytest.mark.parametrize("seed", range(60))
    def test_agrees_with_hungarian(self, seed):
        rng = np.random.default_rng(seed)
        m, n = rng.integers(0, 12, 2)
        q = (1.0, 2.0)[seed % 2]
        if seed % 3 == 0:
            d1 = diag(np.stack([np.zeros(m), rng.random(m)], axis=1))
            d2 = diag(np.stack([np.zeros(n), rng.random(n)], axis=1))
        else:
            c1, c2 = 1 + rng.random(2)
            d1 = diag(np.stack([rng.random(m), np.full(m, c1)], axis=1), 1)
            d2 = diag(np.stack([rng.random(n), np.full(n, c2)], axis=1), 1)
        if seed % 5 == 0:
            d1, d2 = diag(np.round(d1.points * 4) / 4, d1.dim), diag(np.round(d2.points * 4) / 4, d2.dim)
        fast, matching = wasserstein_matching(d1, d2, q, method="line")
        slow = wasserstein(d1, d2, q, method="hungarian")
        assert math.isclose(fast, slow, rel_tol=1e-12, abs_tol=1e-12)
        # the returned matching realises the value
        cost = 0.0
        for i, j in matching:
            if i >= 0 and j >= 0:
                cost += np.max(np.abs(d1.points[i] - d2.points[j])) ** q
            elif i >= 0:
                cost += ((d1.points[i, 1] - d1.points[i, 0]) / 2) ** q
            else:
                cost += ((d2.points[j, 1] - d2.points[j, 0]) / 2) ** q
        assert math.isclose(cost ** (1 / q), slow, rel_tol=1e-12, abs_tol=1e-12)

    def test_line_rejects_general(self):
        with pytest.raises(TomaError):
            wasserstein(diag([(0, 1), (0.5, 2)]), diag([(0.2, 1)]), method="line")

    def test_unknown_method(self):
        with pytest.raises(TomaError):
            wasserstein(diag([]), diag([]), method="sinkhorn")


class TestPersistenceImage:
    def test_empty(self):
        img = persistence_image(diag([]), resolution=5)
        assert img.grid.shape == (5, 5) and not img.grid.any()

    def test_single_cell_closed_form(self):
        sigma = 0.3
        img = persistence_image(diag([(0, 1)]), resolution=1, sigma=sigma, bounds=(0.0, 1.0, 0.5, 1.5))
        # one cell centred at (birth 0.5, persistence 1.0); weight = persistence = 1
        want = math.exp(-(0.5**2) / (2 * sigma**2)) / (2 * math.pi * sigma**2)
        assert math.isclose(img.grid[0, 0], want, rel_tol=1e-14)

    def test_duplicate_doubles(self):
        d = diag([(0, 1), (0.2, 0.9)])
        a = persistence_image(d, 10, 0.1, (0, 1, 0, 1))
        b = persistence_image(d.union(d), 10, 0.1, (0, 1, 0, 1))
        np.testing.assert_allclose(b.grid, 2 * a.grid, rtol=0, atol=1e-12)

    def test_defaults(self):
        d = diag([(0, 2), (1, 2)])
        img = persistence_image(d)
        assert img.grid.shape == (20, 20)
        assert img.sigma == pytest.approx(0.2)
        assert img.bounds == pytest.approx((-0.1, 1.1, 0.9, 2.1))
        assert np.all(img.grid >= 0)
        assert default_sigma(diag([(1, 1)])) == 1e-6
        assert auto_bounds(diag([(1, 2)]), 0.5) == (0.5, 1.5, 0.5, 1.5)

    def test_grid_orientation(self):
        img = persistence_image(diag([(0.0, 0.9)]), 10, 0.05, (0, 1, 0, 1))
        r, c = np.unravel_index(np.argmax(img.grid), img.grid.shape)
        assert (r, c) == (9, 0)

    def test_json_round_trip(self):
        img = persistence_image(diag([(0, 1), (0.3, 0.5)]), 4)
        back = PersistenceImage.from_json(img.to_json())
        assert np.array_equal(back.grid, img.grid)
        assert back.bounds == img.bounds and back.sigma == img.sigma

    def test_vjp_matches_finite_differences(self):
        rng = np.random.default_rng(9)
        d = random_diagram(rng, 4)
        bounds, sigma = (0.0, 1.2, 0.0, 1.2), 0.15
        up = rng.normal(size=(8, 8))
        img = persistence_image(d, 8, sigma, bounds)
        g = persistence_image_vjp(d, img, up)
        h = 1e-6
        for k in range(len(d)):
            for c in range(2):
                p = d.points.copy()
                p[k, c] += h
                fp = np.sum(up * persistence_image(diag(p), 8, sigma, bounds).grid)
                p[k, c] -= 2 * h
                fm = np.sum(up * persistence_image(diag(p), 8, sigma, bounds).grid)
                assert math.isclose(g[k, c], (fp - fm) / (2 * h), rel_tol=1e-6, abs_tol=1e-8)

    @given(diagrams, st.randoms(use_true_random=False))
    def test_permutation_invariant(self, d, rnd):
        order = list(range(len(d)))
        rnd.shuffle(order)
        a = persistence_image(d, 6)
        b = persistence_image(diag(d.points[order]), 6)
        np.testing.assert_allclose(a.grid, b.grid, rtol=1e-12, atol=1e-12)


class TestImageL2:
    def test_self(self):
        img = persistence_image(diag([(0, 1)]), 3)
        assert image_l2(img, img) == 0.0

    def test_single_entry(self):
        zero = PersistenceImage(np.zeros((2, 2)), (0, 1, 0, 1), 0.1)
        grid = np.zeros((2, 2))
        grid[1, 0] = 3.0
        assert image_l2(zero, PersistenceImage(grid, (0, 1, 0, 1), 0.1)) == 3.0

    def test_flat_recomputation(self):
        rng = np.random.default_rng(21)
        a, b = random_diagram(rng, 6), random_diagram(rng, 5)
        bounds = auto_bounds(a.union(b), 0.1)
        ia, ib = persistence_image(a, 7, 0.1, bounds), persistence_image(b, 7, 0.1, bounds)
        flat = math.sqrt(sum((x - y) ** 2 for x, y in zip(ia.grid.ravel(), ib.grid.ravel())))
        assert math.isclose(image_l2(ia, ib), flat, rel_tol=1e-12)

    def test_bounds_mismatch(self):
        a = PersistenceImage(np.zeros((2, 2)), (0, 1, 0, 1), 0.1)
        with pytest.raises(BoundsMismatch):
            image_l2(a, PersistenceImage(np.zeros((2, 2)), (0, 2, 0, 1), 0.1))
        with pytest.raises(BoundsMismatch):
            image_l2(a, PersistenceImage(np.zeros((3, 3)), (0, 1, 0, 1), 0.1))
