import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sphertess.processes import crofton_cell, sample_poisson
from sphertess.sphere_core import (Cap, cap_U1, origin, random_rotation, sample_uniform,
                                   tangent_basis, unit)
from sphertess.spherical_convex import (HPolytope, ImproperError, InfeasibleError, VPolytope,
                                        cap_hpolytope, cap_vpolytope, contains,
                                        hausdorff_distance, hits_great_subsphere,
                                        max_min_direction, polar, polygon_area,
                                        polygon_perimeter, polytope_from_json, polytope_to_json,
                                        radial_function, simplify_vertices, vertices)

OCTANT = HPolytope(np.eye(3), 2)


def random_cell(seed, k=8):
    """A proper Crofton cell on S^2 with k great circles."""
    rng = np.random.default_rng(seed)
    while True:
        P = crofton_cell(sample_uniform(rng, 2, k))
        rep = vertices(P, report=True)
        if rep.line_free:
            return P


def girard_area(V):
    """Spherical excess from the interior angles of the polygon with ordered vertices V."""
    n = len(V)
    total = 0.0
    for i in range(n):
        p, a, b = V[i], V[i - 1], V[(i + 1) % n]
        ta = a - (a @ p) * p
        tb = b - (b @ p) * p
        total += math.acos(np.clip(ta @ tb / np.linalg.norm(ta) / np.linalg.norm(tb), -1, 1))
    return total - (n - 2) * math.pi


def ordered_vertices(P):
    V = vertices(P).vertices
    c = V.mean(axis=0)
    c /= np.linalg.norm(c)
    T = tangent_basis(c)
    ang = np.arctan2(V @ T[1], V @ T[0])
    return V[np.argsort(ang)]


def test_contains_examples():
    assert contains(HPolytope.whole_sphere(2), origin(2))
    assert contains(OCTANT, np.ones(3) / math.sqrt(3))
    assert not contains(OCTANT, -origin(2))


def test_octant_vertices_and_hemisphere():
    V = vertices(OCTANT).vertices
    assert sorted(map(tuple, np.round(V, 12))) == sorted(map(tuple, np.eye(3)))
    rep = vertices(HPolytope([[1.0, 0, 0]], 2), report=True)
    assert len(rep.polytope) == 0 and not rep.line_free


@pytest.mark.parametrize("seed", range(15))
def test_crofton_vertices_are_generic(seed):
    P = random_cell(seed, k=3 + seed % 6)
    V = vertices(P).vertices
    ip = V @ P.normals.T
    assert np.all(ip >= -1e-9)
    assert np.all((np.abs(ip) <= 1e-9).sum(axis=1) == 2)


def test_rotation_equivariance():
    P = random_cell(3)
    R = random_rotation(np.random.default_rng(1), 2)
    a = vertices(P.rotated(R)).vertices
    b = vertices(P).vertices @ R.T
    key = lambda A: A[np.lexsort(np.round(A, 8).T[::-1])]
    assert np.allclose(key(a), key(b), atol=1e-9)


def test_infeasible_reported():
    with pytest.raises(InfeasibleError):
        vertices(HPolytope([[1.0, 0, 0], [-1.0, 0, 0]], 2))


def chebyshev_grid(N, n=200_000, seed=0):
    X = sample_uniform(np.random.default_rng(seed), N.shape[1] - 1, n)
    vals = (X @ N.T).min(axis=1)
    return vals.max()


@pytest.mark.parametrize("seed", range(5))
def test_chebyshev_beats_grid_search(seed):
    P = random_cell(seed + 100)
    e, s = max_min_direction(P.normals)
    assert np.min(P.normals @ e) == pytest.approx(s, abs=1e-9)
    grid = chebyshev_grid(P.normals)
    assert s >= grid - 1e-12
    assert s - grid < 5e-3


def test_polar_examples():
    V = vertices(OCTANT)
    H = polar(V)
    assert np.allclose(np.sort(H.normals, axis=0), np.sort(-np.eye(3), axis=0))
    c = polar(Cap(origin(2), 0.4))
    assert np.allclose(c.center, -origin(2)) and c.radius == pytest.approx(math.pi / 2 - 0.4)
    with pytest.raises(ImproperError):
        polar(HPolytope.whole_sphere(2))


@pytest.mark.parametrize("seed", range(8))
def test_polar_involution(seed):
    V = vertices(random_cell(seed + 7))
    dual = polar(V)
    assert vertices(dual, report=True).line_free
    W = polar(dual).vertices
    key = lambda A: A[np.lexsort(np.round(A, 8).T[::-1])]
    assert np.allclose(key(W), key(V.vertices), atol=1e-9)


def test_hits_examples():
    o = origin(2)
    assert hits_great_subsphere(VPolytope([o], 2), np.array([0.0, 1, 0]))
    assert not hits_great_subsphere(VPolytope([o], 2), o)
    assert hits_great_subsphere(vertices(OCTANT), np.array([1.0, -1, 0]) / math.sqrt(2))


@given(st.integers(0, 2**32 - 1))
def test_hits_symmetric_and_strict_inside(seed):
    rng = np.random.default_rng(seed)
    V = vertices(random_cell(seed % 50))
    x = sample_uniform(rng, 2)
    assert hits_great_subsphere(V, x) == hits_great_subsphere(V, -x)
    e, _ = max_min_direction(V.vertices)
    assert not hits_great_subsphere(V, e)


def test_hits_measure_matches_cap_U1(rng):
    X = sample_uniform(rng, 2, 100_000)
    cap = Cap(unit([1.0, 1.0, 0.0]), 0.5)
    p = np.mean(hits_great_subsphere(cap, X))
    assert abs(p - 2 * cap_U1(2, 0.5)) <= 3 * math.sqrt(p * (1 - p) / len(X))


def bisect_radial(P, e, u, iters=80):
    lo, hi = 0.0, math.pi / 2
    for _ in range(iters):
        mid = (lo + hi) / 2
        if contains(P, math.cos(mid) * e + math.sin(mid) * u):
            lo = mid
        else:
            hi = mid
    return lo


def test_radial_function_examples():
    e = np.ones(3) / math.sqrt(3)
    T = tangent_basis(e)
    for phi in np.linspace(0, 2 * math.pi, 13):
        u = math.cos(phi) * T[0] + math.sin(phi) * T[1]
        assert radial_function(OCTANT, e, u) == pytest.approx(bisect_radial(OCTANT, e, u), abs=1e-9)
    hemi = HPolytope([origin(2)], 2)
    assert radial_function(hemi, origin(2), np.array([0, 0, 1.0]), check=False) == pytest.approx(math.pi / 2)
    assert radial_function(Cap(origin(2), 0.3), origin(2), np.array([0, 1.0, 0])) == 0.3
    with pytest.raises(ValueError):
        radial_function(OCTANT, -origin(2), np.array([0, 1.0, 0]))


@pytest.mark.parametrize("seed", range(6))
def test_radial_function_boundary_point(seed):
    P = random_cell(seed + 30)
    e, _ = max_min_direction(P.normals)
    T = tangent_basis(e)
    for phi in np.linspace(0, 2 * math.pi, 17):
        u = math.cos(phi) * T[0] + math.sin(phi) * T[1]
        t = radial_function(P, e, u)
        assert t == pytest.approx(bisect_radial(P, e, u), abs=1e-9)
        y = math.cos(t) * e + math.sin(t) * u
        assert np.min(P.normals @ y) == pytest.approx(0.0, abs=1e-9)


def test_polygon_area_octant_and_caps():
    assert polygon_area(OCTANT) == pytest.approx(math.pi / 2)
    assert polygon_perimeter(OCTANT) == pytest.approx(3 * math.pi / 2)
    assert polygon_area(HPolytope.whole_sphere(2)) == pytest.approx(4 * math.pi)
    # lune of angle 0.7
    lune = HPolytope([[0, 1.0, 0], [0, -math.cos(0.7), math.sin(0.7)]], 2)
    assert polygon_area(lune) == pytest.approx(1.4)
    assert polygon_perimeter(lune) == pytest.approx(2 * math.pi)


@pytest.mark.parametrize("seed", range(10))
def test_polygon_area_against_girard(seed):
    P = random_cell(seed + 200, k=4 + seed)
    assert polygon_area(P) == pytest.approx(girard_area(ordered_vertices(P)), abs=1e-9)


def test_polygon_area_against_hit_or_miss(rng):
    P = random_cell(11)
    X = sample_uniform(rng, 2, 200_000)
    p = np.mean(contains(P, X))
    assert abs(4 * math.pi * p - polygon_area(P)) <= 3 * 4 * math.pi * math.sqrt(p * (1 - p) / len(X))


def test_cap_discretisations():
    e = unit([1.0, 2.0, 2.0])
    H = cap_hpolytope(e, 0.4, 12)
    assert np.min(H.normals @ e) == pytest.approx(math.sin(0.4))
    V = cap_vpolytope(e, 0.4, 12)
    assert np.allclose(V.vertices @ e, math.cos(0.4))


def test_hausdorff_examples():
    e = origin(2)
    K = cap_vpolytope(e, 0.3, 64)
    assert hausdorff_distance(K, K).value == pytest.approx(0.0, abs=1e-12)
    Q = cap_vpolytope(e, 0.5, 64)
    res = hausdorff_distance(K, Q)
    assert abs(res.value - 0.2) <= 0.5 * (1 - math.cos(math.pi / 64)) + res.mesh


def test_simplify_vertices():
    P = cap_vpolytope(origin(2), 0.6, 200)
    assert simplify_vertices(cap_vpolytope(origin(2), 0.6, 6), 8).vertices.shape == (6, 3)
    Q = simplify_vertices(P, 16)
    assert len(Q) <= 16
    assert all(np.min(np.linalg.norm(P.vertices - v, axis=1)) < 1e-12 for v in Q.vertices)
    with pytest.raises(ValueError):
        simplify_vertices(P, 2)
    errs = [hausdorff_distance(P, simplify_vertices(P, k)).value for k in (8, 16, 32)]
    assert errs[0] > errs[1] > errs[2]


def test_json_roundtrip():
    P = random_cell(5)
    s = polytope_to_json(P)
    obj = json.loads(s)
    assert set(obj) == {"dim", "normals", "vertices"}
    Q = polytope_from_json(s)
    assert np.array_equal(Q.normals, P.normals)
    V = polytope_from_json(s, "v")
    assert np.array_equal(V.vertices, np.array(obj["vertices"]))
