import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special, stats

from sphertess.sphere_core import (Cap, cap_U1, cap_radius_for_volume, cap_volume,
                                   geodesic_distance, omega, origin, random_rotation,
                                   rotation_to, sample_uniform, sine_integral_D, tangent_basis,
                                   transporter, unit)

from conftest import unit_vectors


def D_oracle(d, x):
    return float(mpmath.quad(lambda t: mpmath.sin(t) ** (d - 1), [0, x]))


def D_betainc(d, x):
    # regularized incomplete beta form, valid on [0, pi/2]
    return 0.5 * special.beta(d / 2, 0.5) * special.betainc(d / 2, 0.5, math.sin(x) ** 2)


def test_unit_renormalises_and_rejects_bad_input():
    v = unit([3.0, 4.0, 0.0])
    assert abs(np.linalg.norm(v) - 1) <= 1e-12
    with pytest.raises(ValueError):
        unit([1.0, 0.0])
    with pytest.raises(ValueError):
        unit([0.0, 0.0, 0.0])


def test_distance_examples():
    e = origin(2)
    assert geodesic_distance(e, e) == 0.0
    assert geodesic_distance(e, -e) == pytest.approx(math.pi)
    assert geodesic_distance(e, np.array([0.0, 1, 0])) == pytest.approx(math.pi / 2)
    with pytest.raises(ValueError):
        geodesic_distance(e, origin(3))


@given(unit_vectors(3), unit_vectors(3), unit_vectors(3))
def test_distance_metric_axioms(x, y, z):
    assert geodesic_distance(x, y) == pytest.approx(geodesic_distance(y, x), abs=1e-12)
    assert geodesic_distance(x, z) <= geodesic_distance(x, y) + geodesic_distance(y, z) + 1e-9


def test_omega():
    assert omega(2) == pytest.approx(2 * math.pi)
    assert omega(3) == pytest.approx(4 * math.pi)
    assert omega(4) == pytest.approx(2 * math.pi ** 2)


@pytest.mark.parametrize("d", [2, 3, 4, 5, 7])
@pytest.mark.parametrize("x", [0.0, 0.1, 0.7, math.pi / 2, 2.0, math.pi])
def test_D_against_arbitrary_precision_quadrature(d, x):
    assert sine_integral_D(d, x) == pytest.approx(D_oracle(d, x), abs=1e-12)


@pytest.mark.parametrize("d", [2, 3, 4, 6])
def test_D_against_incomplete_beta(d):
    for x in np.linspace(0, math.pi / 2, 9):
        assert sine_integral_D(d, x) == pytest.approx(D_betainc(d, x), abs=1e-12)


def test_D_examples_and_domain():
    assert sine_integral_D(3, math.pi / 2) == pytest.approx(math.pi / 4, abs=1e-14)
    assert sine_integral_D(2, 1.1) == pytest.approx(1 - math.cos(1.1), abs=1e-15)
    with pytest.raises(ValueError):
        sine_integral_D(2, 3.5)


@given(st.integers(2, 6), st.floats(0, math.pi), st.floats(0, math.pi))
def test_D_monotone(d, x, y):
    if x < y - 1e-9:
        assert sine_integral_D(d, x) < sine_integral_D(d, y)


def test_cap_volume_examples():
    assert cap_volume(2, math.pi / 2) == pytest.approx(2 * math.pi)
    assert cap_volume(2, math.pi) == pytest.approx(4 * math.pi)
    assert cap_volume(2, 0.6) == pytest.approx(2 * math.pi * (1 - math.cos(0.6)), abs=1e-14)
    assert cap_volume(2, 0.6) == pytest.approx(1.09745, abs=5e-6)
    for d in (2, 3, 4, 5):
        assert cap_volume(d, math.pi / 2) == pytest.approx(omega(d + 1) / 2, abs=1e-12)
        assert cap_volume(d, math.pi) == pytest.approx(omega(d + 1), abs=1e-12)


def test_cap_U1_examples():
    assert cap_U1(3, 0.0) == 0.0
    for a in (0.1, 0.5, 1.2):
        assert cap_U1(2, a) == pytest.approx(math.sin(a) / 2, abs=1e-14)
    assert cap_U1(2, math.pi / 2) == pytest.approx(0.5)
    # direct integral of cos^{d-1}
    for d in (3, 4):
        integral = float(mpmath.quad(lambda t: mpmath.cos(t) ** (d - 1), [0, 0.8]))
        ref = omega(d) / omega(d + 1) * integral
        assert cap_U1(d, 0.8) == pytest.approx(ref, abs=1e-12)
    with pytest.raises(ValueError):
        cap_U1(2, 2.0)


@given(st.integers(2, 5), st.floats(0.01, 3.1))
def test_cap_radius_inverts_volume(d, r):
    assert cap_radius_for_volume(d, cap_volume(d, r)) == pytest.approx(r, abs=1e-9)


def test_sampling_moments_and_cap_frequency(rng):
    X = sample_uniform(rng, 2, 100_000)
    assert np.max(np.abs(np.linalg.norm(X, axis=1) - 1)) <= 1e-12
    assert np.all(np.abs(X.mean(axis=0)) <= 4 / math.sqrt(1e5))
    p = cap_volume(2, 0.6) / (4 * math.pi)
    hits = np.mean(X @ origin(2) >= math.cos(0.6))
    assert abs(hits - p) <= 3 * math.sqrt(p * (1 - p) / 1e5)


def test_rotation_invariance_chi_square(rng):
    """Rotated samples land in 20 fixed caps with the frequencies of unrotated ones."""
    centres = sample_uniform(np.random.default_rng(7), 2, 20)
    R = random_rotation(np.random.default_rng(8), 2)
    X = sample_uniform(rng, 2, 50_000) @ R.T
    r = 0.3
    counts = (X @ centres.T >= math.cos(r)).sum(axis=0)
    p = cap_volume(2, r) / omega(3)
    chi2 = np.sum((counts - len(X) * p) ** 2 / (len(X) * p * (1 - p)))
    assert stats.chi2.sf(chi2, 20) > 0.01


@given(unit_vectors(3), st.integers(0, 2**32 - 1))
def test_rotation_to_maps_origin(x, seed):
    R = rotation_to(x, np.random.default_rng(seed))
    assert np.allclose(R @ origin(3), x, atol=1e-10)
    assert np.allclose(R.T @ R, np.eye(4), atol=1e-10)
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-10)


def test_transporter_antipode_and_tangent_basis():
    e = origin(2)
    T = transporter(-e)
    assert np.allclose(T @ e, -e)
    B = tangent_basis(unit([1.0, 2.0, 3.0]))
    assert np.allclose(B @ unit([1.0, 2.0, 3.0]), 0, atol=1e-12)
    assert np.allclose(B @ B.T, np.eye(2), atol=1e-12)


def test_stabilizer_is_uniform_on_tangent_circle():
    """x = origin: images of a fixed tangent vector are uniform in angle (Rayleigh test)."""
    rng = np.random.default_rng(3)
    v = np.array([0.0, 1.0, 0.0])
    ang = np.array([math.atan2(*(rotation_to(origin(2), rng) @ v)[[2, 1]]) for _ in range(2000)])
    Rbar = abs(np.mean(np.exp(1j * ang)))
    z = len(ang) * Rbar ** 2
    assert math.exp(-z) > 0.01


def test_cap_invariants():
    c = Cap([0, 0, 2.0], 1.0)
    assert c.dim == 2 and c.proper and c.contains(np.array([0, math.sin(0.9), math.cos(0.9)]))
    assert not Cap(origin(2), 2.0).proper
    with pytest.raises(ValueError):
        Cap(origin(2), 4.0)
