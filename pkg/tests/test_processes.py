import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from sphertess.constants import schlafli_count
from sphertess.functionals import circumcenter, volume
from sphertess.processes import (DegenerateError, bisector_crofton_cell, cell_centre,
                                 crofton_area_s2, crofton_cell, partition_volume, same_normal_set,
                                 sample_poisson, sample_tessellation, tessellation_cells,
                                 typical_cell, voronoi_cell, voronoi_tessellation,
                                 voronoi_typical_cell)
from sphertess.sphere_core import geodesic_distance, origin, random_rotation, sample_uniform, unit
from sphertess.spherical_convex import contains, polygon_area, vertices


def test_poisson_count_mean():
    rng = np.random.default_rng(1)
    counts = [len(sample_poisson(4 / (4 * math.pi), 2, rng)) for _ in range(10_000)]
    assert abs(np.mean(counts) - 4) <= 3 * math.sqrt(4 / 1e4)
    assert 0 in counts
    with pytest.raises(ValueError):
        sample_poisson(0.0, 2)


def test_poisson_points_uniform():
    X = np.vstack([sample_poisson(5.0, 2, s) for s in range(200)])
    p = np.mean(X @ origin(2) >= math.cos(0.6))
    q = (1 - math.cos(0.6)) / 2
    assert abs(p - q) <= 3 * math.sqrt(q * (1 - q) / len(X))


def test_crofton_cell_examples():
    assert crofton_cell(np.zeros((0, 3))).is_whole_sphere
    P = crofton_cell(np.array([[-0.9, 0.1, math.sqrt(1 - 0.82)]]))
    assert len(P) == 1 and np.allclose(P.normals[0] @ origin(2), 0.9)
    with pytest.raises(DegenerateError):
        crofton_cell(np.array([[0.0, 1.0, 0.0]]))


@given(st.integers(0, 2**32 - 1))
def test_crofton_cell_contains_origin_and_shrinks(seed):
    rng = np.random.default_rng(seed)
    X = sample_poisson(1.0, 2, rng)
    if len(X) == 0:
        return
    P = crofton_cell(X)
    assert np.min(P.normals @ origin(2)) > 0
    Q = crofton_cell(np.vstack([X, sample_uniform(rng, 2, 1)]))
    Y = sample_uniform(rng, 2, 2000)
    assert not np.any(contains(Q, Y) & ~contains(P, Y))


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.integers(0, 25))
def test_fast_area_matches_polygon_area(seed, k):
    X = sample_uniform(np.random.default_rng(seed), 2, k).reshape(-1, 3)
    assert crofton_area_s2(X) == pytest.approx(polygon_area(crofton_cell(X)), abs=1e-10)


@pytest.mark.parametrize("k", range(0, 11))
def test_tessellation_schlafli_and_partition(k):
    rng = np.random.default_rng(k)
    for _ in range(5):
        t = tessellation_cells(sample_uniform(rng, 2, k).reshape(-1, 3), 2, rng)
        assert len(t) == schlafli_count(2, k)
        assert partition_volume(t) == pytest.approx(4 * math.pi, abs=1e-9)
        for c in t.cells:
            if len(c):
                assert np.min(c.normals @ c.witness) > 0


def test_tessellation_examples_and_degeneracy():
    t = tessellation_cells(sample_uniform(np.random.default_rng(0), 2, 3), 2)
    assert len(t) == 8
    assert len(tessellation_cells([[0, 0, 1.0]], 2)) == 2
    with pytest.raises(DegenerateError):
        tessellation_cells([[0, 0, 1.0], [0, 0, 1.0]], 2)
    with pytest.raises(DegenerateError):
        tessellation_cells([[1.0, 0, 0], [0, 1.0, 0], [1.0, 1.0, 0]], 2)
    with pytest.raises(NotImplementedError):
        tessellation_cells([[1.0, 0, 0, 0]], 3)


def test_partition_by_monte_carlo():
    t = tessellation_cells(sample_uniform(np.random.default_rng(4), 2, 6), 2)
    vols = [volume(c, 40_000, i) for i, c in enumerate(t.cells)]
    total = sum(v.value for v in vols)
    se = math.sqrt(sum(v.stderr ** 2 for v in vols))
    assert abs(total - 4 * math.pi) <= 3 * se


def test_tessellation_json():
    t, _ = sample_tessellation(0.5, 2, np.random.default_rng(3))
    obj = json.loads(t.to_json())
    assert obj["kind"] == "Hyperplane" and len(obj["cells"]) == len(t)


def test_typical_cell_is_centred():
    rng = np.random.default_rng(5)
    for _ in range(20):
        t, _ = sample_tessellation(1.0, 2, rng)
        Z = typical_cell(t, rng)
        rep = vertices(Z, report=True)
        if rep.line_free:
            c, _ = circumcenter(rep.polytope)
            assert np.allclose(c, origin(2), atol=1e-8)
        # the minimax centre lies in the cell, possibly on an edge
        assert np.min(Z.normals @ origin(2)) >= -1e-9 if len(Z) else True


def test_typical_cell_invariant_under_stabiliser():
    """Distribution of a rotation-invariant statistic is unchanged by an extra rotation fixing the origin."""
    from sphertess.sphere_core import random_stabilizer
    rng = np.random.default_rng(6)
    a, b = [], []
    for i in range(300):
        t, _ = sample_tessellation(1.0, 2, rng)
        Z = typical_cell(t, rng)
        a.append(polygon_area(Z))
        Zr = typical_cell(t, rng).rotated(random_stabilizer(rng, 2))
        b.append(polygon_area(Zr))
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_voronoi_examples():
    x = unit([0.2, 0.3, 1.0])
    assert voronoi_cell(x, [x]).is_whole_sphere
    H = voronoi_cell(x, [x, -x])
    assert len(H) == 1 and np.allclose(H.normals[0], x)
    A = sample_uniform(np.random.default_rng(2), 2, 15)
    C = voronoi_cell(A[0], A)
    Y = sample_uniform(np.random.default_rng(3), 2, 20_000)
    Y = Y[contains(C, Y)]
    d0 = geodesic_distance(Y, A[0])
    assert np.all(d0[:, None] <= geodesic_distance(Y[:, None, :], A[None, :, :]) + 1e-9)


def test_voronoi_tessellation_examples():
    x = unit([1.0, 2, 3])
    t = voronoi_tessellation(np.array([x, -x]))
    assert [len(c) for c in t.cells] == [1, 1]
    tet = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / math.sqrt(3)
    t = voronoi_tessellation(tet)
    assert all(polygon_area(c) == pytest.approx(math.pi) for c in t.cells)
    R = random_rotation(np.random.default_rng(1), 2)
    A = sample_uniform(np.random.default_rng(2), 2, 10)
    lhs = voronoi_cell(R @ A[0], A @ R.T)
    rhs = voronoi_cell(A[0], A).rotated(R)
    assert same_normal_set(lhs, rhs, 1e-10)


def test_voronoi_typical_and_bisector_identity():
    assert voronoi_typical_cell(1e-9, 2, 0).is_whole_sphere
    for s in range(200):
        V, B = voronoi_typical_cell(2.0, 2, s, both=True)
        assert same_normal_set(V, B, 1e-10)
    X = sample_uniform(np.random.default_rng(0), 2, 5)
    assert same_normal_set(bisector_crofton_cell(X), voronoi_cell(origin(2), np.vstack([origin(2), X])))


def test_cell_centre_fallbacks():
    from sphertess.spherical_convex import HPolytope
    assert np.allclose(cell_centre(HPolytope.whole_sphere(2)), origin(2))
    lune = HPolytope([[0, 1.0, 0], [0, -0.5, math.sqrt(0.75)]], 2)
    c = cell_centre(lune)
    assert np.min(lune.normals @ c) > 0
