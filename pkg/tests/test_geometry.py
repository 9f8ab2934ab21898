"""Geometry: pseudometrics, hull queries, MVEE, transforms, hull distance."""

import math

import numpy as np
import pytest

from marginrec import geometry as geo
from marginrec.geometry import (
    AffineMap,
    PointSet,
    Pseudometric,
    affine_span,
    diameter,
    distance,
    hull_contains,
    hull_contains_many,
    hull_distance,
    hull_distances,
    isotropic_transform,
    mvee,
    ray_hull_exit,
    scaled_hull_contains,
    set_distance,
)

EUCLID = Pseudometric.euclidean()

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
SIMPLEX2 = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def _random_metric(gen, m):
    kind = gen.integers(3)
    if kind == 0:
        return EUCLID
    if kind == 1:
        A = gen.standard_normal((m, m))
        return Pseudometric.mahalanobis(A @ A.T)
    q = int(gen.integers(1, m + 1))
    mat = gen.standard_normal((m, m))
    qmat, _ = np.linalg.qr(mat)
    return Pseudometric.projection(qmat[:, :q].T)


# ---------------------------------------------------------------------------
# Pseudometric and point types
# ---------------------------------------------------------------------------

class TestPseudometric:
    def test_euclidean_pythagorean(self):
        assert distance(EUCLID, [0.0, 0.0], [3.0, 4.0]) == pytest.approx(5.0)

    def test_zero_matrix_degenerate(self):
        d = Pseudometric.mahalanobis(np.zeros((2, 2)))
        assert distance(d, [1.0, 2.0], [-5.0, 9.0]) == 0.0

    def test_projection_orthogonal_difference(self):
        d = Pseudometric.projection([[1.0, 0.0]])
        assert distance(d, [1.0, 5.0], [1.0, -7.0]) == 0.0

    def test_mahalanobis_is_sqrt_of_quadratic_form(self):
        gen = np.random.default_rng(0)
        A = gen.standard_normal((3, 3))
        W = A @ A.T
        d = Pseudometric.mahalanobis(W)
        x, y = gen.standard_normal(3), gen.standard_normal(3)
        assert distance(d, x, y) == pytest.approx(
            math.sqrt((x - y) @ W @ (x - y)), rel=1e-12)

    def test_rejects_asymmetric_and_indefinite(self):
        with pytest.raises(ValueError):
            Pseudometric.mahalanobis([[0.0, 1.0], [0.5, 0.0]])
        with pytest.raises(ValueError):
            Pseudometric.mahalanobis([[-1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(ValueError):
            Pseudometric.projection([[1.0, 1.0]])  # not unit norm

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            distance(EUCLID, [0.0, 0.0], [1.0])
        d = Pseudometric.projection([[1.0, 0.0]])
        with pytest.raises(ValueError):
            distance(d, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0])

    @pytest.mark.parametrize("seed", range(5))
    def test_metric_axioms_on_random_triples(self, seed):
        gen = np.random.default_rng(seed)
        m = int(gen.integers(1, 5))
        d = _random_metric(gen, m)
        for _ in range(20):
            x, y, z = gen.standard_normal((3, m)) * 3
            dxy = distance(d, x, y)
            assert dxy >= 0
            assert dxy == pytest.approx(distance(d, y, x), abs=1e-12)
            assert distance(d, x, x) == 0.0
            assert dxy <= distance(d, x, z) + distance(d, z, y) + 1e-9

    @pytest.mark.parametrize("seed", range(5))
    def test_seminorm_invariances(self, seed):
        gen = np.random.default_rng(100 + seed)
        m = int(gen.integers(1, 5))
        d = _random_metric(gen, m)
        x, y, t = gen.standard_normal((3, m))
        base = distance(d, x, y)
        assert distance(d, x + t, y + t) == pytest.approx(base, abs=1e-9)
        for a in (0.0, 0.5, 2.0, 7.5):
            assert distance(d, a * x, a * y) == pytest.approx(
                a * base, rel=1e-9, abs=1e-9)

    def test_pointset_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            PointSet(np.array([[0.0, np.nan]]))
        with pytest.raises(ValueError):
            PointSet(np.array([[np.inf, 1.0]]))


# ---------------------------------------------------------------------------
# Diameter / set distance
# ---------------------------------------------------------------------------

class TestSetDistances:
    def test_diameter_conventions(self):
        assert diameter(EUCLID, np.zeros((0, 2))) == 0.0
        assert diameter(EUCLID, np.array([[0.0, 0.0]])) == 0.0

    def test_diameter_three_points(self):
        # brute force over the three pairs: 1, 1, sqrt(2)
        S = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        assert diameter(EUCLID, S) == pytest.approx(math.sqrt(2.0))

    def test_diameter_matches_brute_force_random(self):
        gen = np.random.default_rng(2)
        S = gen.standard_normal((40, 3))
        d = _random_metric(gen, 3)
        T = d.transform(S)
        brute = max(np.linalg.norm(a - b) for a in T for b in T)
        assert diameter(d, S) == pytest.approx(brute, rel=1e-12)

    def test_set_distance_conventions(self):
        U = np.array([[0.0, 0.0]])
        assert set_distance(EUCLID, U, np.zeros((0, 2))) == math.inf
        assert set_distance(EUCLID, U, U) == 0.0

    def test_set_distance_brute(self):
        U = np.array([[0.0, 0.0]])
        S = np.array([[3.0, 4.0], [10.0, 0.0]])
        assert set_distance(EUCLID, U, S) == pytest.approx(5.0)


# ---------------------------------------------------------------------------
# Hull membership and ray exits
# ---------------------------------------------------------------------------

class TestHullMembership:
    def test_vertices_and_midpoints(self):
        assert hull_contains(SQUARE, SQUARE[2])
        assert hull_contains(SQUARE, (SQUARE[0] + SQUARE[1]) / 2)

    def test_simplex_outside_point(self):
        # facets x>=0, y>=0, x+y<=1 by hand: (0.6, 0.6) violates the last
        assert not hull_contains(SIMPLEX2, [0.6, 0.6])
        assert hull_contains(SIMPLEX2, [0.4999, 0.4999])

    def test_empty_hull_rejected(self):
        with pytest.raises(ValueError):
            hull_contains(np.zeros((0, 2)), [0.0, 0.0])

    def test_monotone_under_vertex_addition(self):
        gen = np.random.default_rng(4)
        V = gen.standard_normal((6, 2))
        X = gen.standard_normal((50, 2))
        base = hull_contains_many(V, X)
        bigger = hull_contains_many(np.vstack([V, gen.standard_normal((4, 2))]), X)
        assert (~base | bigger).all()

    def test_matches_halfplane_oracle_on_triangle(self):
        gen = np.random.default_rng(9)
        X = gen.uniform(-0.5, 1.5, size=(300, 2))
        inside = (X[:, 0] >= -1e-12) & (X[:, 1] >= -1e-12) \
            & (X.sum(axis=1) <= 1 + 1e-12)
        got = hull_contains_many(SIMPLEX2, X)
        assert np.array_equal(got, inside)

    def test_vertex_reduction_path_agrees(self):
        gen = np.random.default_rng(12)
        V = gen.standard_normal((200, 2))  # > 64 triggers reduction
        X = gen.standard_normal((200, 2)) * 1.5
        got = hull_contains_many(V, X)
        # reference: membership program over the full vertex set
        from marginrec._simplex import feasibility_residuals
        G = np.vstack([V.T, np.ones((1, 200))])
        b = np.hstack([X, np.ones((200, 1))])
        resid = feasibility_residuals(G, b)
        assert np.array_equal(got, resid <= 1e-8)


class TestScaledHull:
    def test_gamma_zero_identity(self):
        gen = np.random.default_rng(5)
        V = gen.standard_normal((7, 2))
        X = gen.standard_normal((30, 2))
        z = V.mean(axis=0)
        a = hull_contains_many(V, X)
        b = geo.scaled_hull_contains_many(V, z, 0.0, X)
        assert np.array_equal(a, b)

    def test_vertex_image_accepted(self):
        gen = np.random.default_rng(6)
        V = gen.standard_normal((6, 3))
        z = V.mean(axis=0)
        gamma = 0.7
        images = z + (1 + gamma) * (V - z)
        assert geo.scaled_hull_contains_many(V, z, gamma, images).all()

    def test_segment_example(self):
        seg = np.array([[0.0], [1.0]])
        # scaled hull about z=0.5 with gamma=1 is [-0.5, 1.5]
        assert scaled_hull_contains(seg, [0.5], 1.0, [1.4])
        assert not scaled_hull_contains(seg, [0.5], 1.0, [1.6])

    def test_monotone_in_gamma(self):
        gen = np.random.default_rng(7)
        V = gen.standard_normal((5, 2))
        z = V.mean(axis=0)
        X = gen.standard_normal((40, 2)) * 2
        small = geo.scaled_hull_contains_many(V, z, 0.3, X)
        large = geo.scaled_hull_contains_many(V, z, 1.7, X)
        assert (~small | large).all()

    def test_negative_gamma_rejected(self):
        with pytest.raises(ValueError):
            scaled_hull_contains(SQUARE, [0.5, 0.5], -0.1, [0.5, 0.5])


class TestRayExit:
    def test_axis_aligned_square(self):
        assert ray_hull_exit(SQUARE, [0.5, 0.5], [1.0, 0.0]) == pytest.approx(0.5)

    def test_boundary_outward_zero(self):
        assert ray_hull_exit(SQUARE, [1.0, 0.5], [1.0, 0.0]) == pytest.approx(0.0)

    def test_simplex_diagonal(self):
        # exits on the facet x + y = 1: alpha * sqrt(2) = 1/2
        u = np.array([1.0, 1.0]) / math.sqrt(2.0)
        got = ray_hull_exit(SIMPLEX2, [0.25, 0.25], u)
        assert got == pytest.approx(math.sqrt(2.0) / 4.0, abs=1e-8)

    def test_flat_direction_zero(self):
        seg = np.array([[0.0, 0.0], [1.0, 0.0]])
        assert ray_hull_exit(seg, [0.5, 0.0], [0.0, 1.0]) == pytest.approx(0.0)

    def test_outside_start_rejected(self):
        with pytest.raises(ValueError):
            ray_hull_exit(SQUARE, [2.0, 0.5], [1.0, 0.0])

    def test_non_unit_direction_rejected(self):
        with pytest.raises(ValueError):
            ray_hull_exit(SQUARE, [0.5, 0.5], [1.0, 1.0])

    @pytest.mark.parametrize("seed", range(6))
    def test_exit_point_on_boundary(self, seed):
        gen = np.random.default_rng(40 + seed)
        V = gen.standard_normal((8, 2))
        w = gen.random(8)
        w /= w.sum()
        x = w @ V
        u = gen.standard_normal(2)
        u /= np.linalg.norm(u)
        alpha = ray_hull_exit(V, x, u)
        assert hull_contains(V, x + alpha * u, tol=1e-7)
        assert not hull_contains(V, x + (alpha + 1e-4) * u, tol=1e-8)


# ---------------------------------------------------------------------------
# MVEE and isotropic transform
# ---------------------------------------------------------------------------

class TestMvee:
    def test_single_point_degenerate(self):
        e = mvee(np.array([[2.0, 3.0]]))
        assert e.rank == 0
        assert e.center == pytest.approx([2.0, 3.0])
        assert e.contains(np.array([[2.0, 3.0]]))[0]

    def test_unit_square_circle(self):
        e = mvee(SQUARE)
        assert e.center == pytest.approx([0.5, 0.5], abs=1e-6)
        radii = e.semiaxis_lengths()
        assert radii == pytest.approx([math.sqrt(2) / 2] * 2, rel=1e-2)
        assert e.contains(SQUARE, tol=1e-7).all()

    def test_unit_square_volume_minimality_vs_grid(self):
        # oracle: grid search over axis-aligned ellipses containing the corners
        e = mvee(SQUARE)
        best_area = math.inf
        for cx in np.linspace(0.3, 0.7, 9):
            for cy in np.linspace(0.3, 0.7, 9):
                for a in np.linspace(0.5, 1.2, 29):
                    for b in np.linspace(0.5, 1.2, 29):
                        corners = (SQUARE - [cx, cy]) / [a, b]
                        if (np.sum(corners ** 2, axis=1) <= 1 + 1e-12).all():
                            best_area = min(best_area, math.pi * a * b)
        ours = math.pi * np.prod(e.semiaxis_lengths())
        assert ours <= best_area * 1.01

    def test_two_points_interval(self):
        e = mvee(np.array([[-1.0], [1.0]]))
        assert e.rank == 1
        assert e.center == pytest.approx([0.0], abs=1e-9)
        assert e.semiaxis_lengths() == pytest.approx([1.0], rel=1e-6)

    @pytest.mark.parametrize("seed", range(10))
    def test_containment_and_john_shrink(self, seed):
        gen = np.random.default_rng(200 + seed)
        m = int(gen.integers(1, 4))
        n = int(gen.integers(m + 1, 51))
        V = gen.standard_normal((n, m)) * gen.uniform(0.5, 3)
        e = mvee(V)
        quad = e.quadratic(V)
        assert (quad <= 1 + 1e-6).all()
        pts = e.boundary_points(100, np.random.default_rng(seed),
                                shrink=1.0 / max(e.rank, 1))
        assert hull_contains_many(V, pts, tol=1e-6).all()

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mvee(np.zeros((0, 2)))
        with pytest.raises(ValueError):
            mvee(SQUARE, eps=0.0)


class TestIsotropicTransform:
    def test_regular_simplex_near_identity(self):
        # regular triangle inscribed in the unit circle: MVEE is that circle
        ang = 2 * math.pi * np.arange(3) / 3
        V = np.column_stack([np.cos(ang), np.sin(ang)])
        amap, T = isotropic_transform(V)
        s = np.linalg.svd(amap.linear, compute_uv=False)
        assert s == pytest.approx([1.0, 1.0], abs=1e-3)
        assert (np.linalg.norm(T, axis=1) <= 1 + 1e-6).all()

    def test_collinear_points_rank_one(self):
        V = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])
        amap, T = isotropic_transform(V)
        assert amap.rank == 1
        assert T.shape == (3, 1)

    def test_scaled_square_maps_into_unit_ball(self):
        V = np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]])
        amap, T = isotropic_transform(V)
        assert (np.linalg.norm(T, axis=1) <= 1 + 1e-6).all()
        assert amap.apply([5.0, 5.0]) == pytest.approx([0.0, 0.0], abs=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_invertible_on_image(self, seed):
        gen = np.random.default_rng(300 + seed)
        V = gen.standard_normal((12, 3))
        amap, T = isotropic_transform(V)
        back = amap.invert(amap.apply(V))
        assert back == pytest.approx(V, abs=1e-7)


# ---------------------------------------------------------------------------
# Hull distance
# ---------------------------------------------------------------------------

class TestHullDistance:
    def test_inside_zero(self):
        assert hull_distance(EUCLID, SQUARE, [0.5, 0.5]) <= 1e-6

    def test_segment_orthogonal(self):
        V = np.array([[0.0, 0.0], [1.0, 0.0]])
        assert hull_distance(EUCLID, V, [0.5, 2.0]) == pytest.approx(2.0, rel=1e-6)

    def test_projection_metric(self):
        d = Pseudometric.projection([[1.0, 0.0]])
        V = np.array([[0.0, 0.0], [0.0, 5.0]])
        assert hull_distance(d, V, [3.0, 100.0]) == pytest.approx(3.0, rel=1e-6)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_dense_grid_search(self, seed):
        # oracle: dense grid over the weight simplex, |V| <= 4
        gen = np.random.default_rng(500 + seed)
        m = int(gen.integers(1, 4))
        h = int(gen.integers(2, 5))
        V = gen.standard_normal((h, m))
        x = gen.standard_normal(m) * 1.5
        d = _random_metric(gen, m)
        steps = 40
        grid = np.array(list(_simplex_grid(h, steps)), dtype=float) / steps
        pts = grid @ V
        Tp = d.transform(pts)
        Tx = d.transform(x[None, :])[0]
        brute = np.min(np.linalg.norm(Tp - Tx, axis=1))
        got = hull_distance(d, V, x)
        assert got == pytest.approx(brute, abs=1e-4 + brute * 1e-3)

    def test_zero_iff_member(self):
        gen = np.random.default_rng(8)
        V = gen.standard_normal((6, 2))
        w = gen.random(6)
        w /= w.sum()
        inside = w @ V
        assert hull_distance(EUCLID, V, inside) <= 1e-6
        far = V.max(axis=0) + 3.0
        assert hull_distance(EUCLID, V, far) > 1.0


def _simplex_grid(h, steps):
    """Integer compositions of ``steps`` into h parts (grid on the simplex)."""
    if h == 1:
        yield [steps]
        return
    for lead in range(steps + 1):
        for rest in _simplex_grid(h - 1, steps - lead):
            yield [lead] + rest


def test_affine_span_rank_detection():
    V = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    _, basis, rank = affine_span(V)
    assert rank == 1
    assert basis.shape == (3, 1)
    _, _, rank0 = affine_span(np.array([[5.0, 5.0]]))
    assert rank0 == 0
