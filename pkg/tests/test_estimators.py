import math

import numpy as np
import pytest

from sphertess import estimators as E
from sphertess.functionals import SizeSpec
from sphertess.sphere_core import origin

CENTRED = SizeSpec("CentredInradius", origin(2))
G4 = 4 / (4 * math.pi)


def wilson_formula(k, n, z):
    p = k / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z / (1 + z * z / n) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return centre - half, centre + half


@pytest.mark.parametrize("k,n", [(0, 10), (3, 10), (50, 100), (999, 1000), (10, 10)])
def test_wilson_interval_closed_form(k, n):
    lo, hi = E.wilson_interval(k, n)
    rlo, rhi = wilson_formula(k, n, 1.959963984540054)
    assert lo == pytest.approx(rlo, abs=1e-9) and hi == pytest.approx(rhi, abs=1e-9)
    assert lo <= k / n <= hi
    assert E.wilson_interval(0, 0) == (0.0, 1.0)


def test_conditional_epsilon_zero_and_flags():
    r = E.estimate_conditional_deviation("HyperplaneCrofton", CENTRED, "ThetaR", 0.2, 0.0, 1.0, 200, 1)
    assert r.successes > 0 and r.p_hat == 1.0 and r.joint <= r.successes
    none = E.estimate_conditional_deviation("HyperplaneCrofton", CENTRED, "ThetaR", 1.5, 0.1, 5.0, 20, 1)
    assert none.flagged and none.ci == (0.0, 1.0) and math.isnan(none.p_hat)


def test_conditional_voronoi_large_epsilon_is_zero():
    r = E.estimate_conditional_deviation("VoronoiTypical", CENTRED, "ThetaO", 0.3, math.pi / 2,
                                         20 / (4 * math.pi), 500, 2)
    assert r.successes > 0 and r.joint == 0


def test_conditional_decay_in_intensity():
    """Qualitative decay only: the upper bounds carry non-explicit constants."""
    est = [E.estimate_conditional_deviation("HyperplaneCrofton", CENTRED, "ThetaR", 0.1, 0.5, g,
                                            3000, 3) for g in (0.5, 2.0, 4.0)]
    p = [e.p_hat for e in est]
    widths = [e.ci[1] - e.ci[0] for e in est]
    assert p[2] <= p[0] + 3 * (widths[0] + widths[2])
    assert p[2] < p[0]


def test_conditional_rejects_bad_input():
    with pytest.raises(ValueError):
        E.estimate_conditional_deviation("VoronoiTypical", SizeSpec("Volume"), "ThetaO", 0.3, 0.1, 1.0, 5, 1)
    with pytest.raises(ValueError):
        E.estimate_conditional_deviation("HyperplaneCrofton", CENTRED, "ThetaR", 0.3, -0.1, 1.0, 5, 1)


@pytest.mark.parametrize("model", ["HyperplaneCrofton", "HyperplaneTypical", "VoronoiTypical"])
@pytest.mark.parametrize("dev", ["Delta2", "ThetaR", "ThetaO", "Canonical"])
def test_conditional_all_pairs_run(model, dev):
    r = E.estimate_conditional_deviation(model, CENTRED, dev, 0.15, 0.05, 1.0, 12, 5)
    assert 0 <= r.joint <= r.successes <= r.n
    assert len(r.rows()[0]) == len(r.COLUMNS)


def test_lower_bound_examples():
    r = E.check_zero_cell_lower_bound(CENTRED, 0.3, 0.5, 20_000, 1)
    assert r.rhs == pytest.approx(math.exp(-0.5 * 4 * math.pi * math.sin(0.3)))
    assert r.rhs == pytest.approx(0.1561, abs=1e-4)
    assert r.passed
    tiny = E.check_zero_cell_lower_bound(CENTRED, 0.3, 1e-6, 2000, 1)
    assert tiny.rhs > 0.9999 and tiny.estimate.value > 0.99
    vol = E.check_zero_cell_lower_bound(SizeSpec("Volume"), 2 * math.pi - 1e-9, 0.2, 2000, 2)
    assert vol.rhs == pytest.approx(math.exp(-4 * math.pi * 0.2), rel=1e-6)
    assert vol.passed
    inr = E.check_zero_cell_lower_bound(SizeSpec("Inradius"), 0.3, 0.5, 2000, 3)
    assert inr.passed and inr.estimate.value >= r.estimate.value - 0.05


def test_rate_curve_small():
    a = 2 * math.pi * (1 - math.cos(0.2))
    c = E.estimate_rate(SizeSpec("Volume"), a, [0.5, 1.0, 1.5], 20_000, 1)
    assert c.target == pytest.approx(-4 * math.pi * math.sin(0.2))
    assert c.bound_ok and c.decreasing
    for p in c.points:
        lo, hi = p.ci
        assert 0 <= p.p_hat <= 1 and lo <= p.p_hat <= hi
    with pytest.raises(ValueError):
        E.estimate_rate(SizeSpec("Volume"), a, [1.0, 0.5], 10, 1)


def test_rate_ci_sqrt_law():
    a = 2 * math.pi * (1 - math.cos(0.2))
    w = []
    for n in (10_000, 40_000):
        p = E.estimate_rate(SizeSpec("Volume"), a, [1.0], n, 2).points[0]
        w.append(p.ci[1] - p.ci[0])
    assert w[1] / w[0] == pytest.approx(0.5, rel=0.1)


def test_starvation_flag():
    c = E.estimate_rate(CENTRED, 1.4, [3.0], 2000, 1)
    assert c.points[0].starved and not c.decreasing


def test_cell_count_small_and_zero_intensity():
    r = E.check_cell_count(G4, 1500, 1)
    assert r.passed and r.mismatches == 0
    z = E.check_cell_count(1e-6, 200, 1)
    assert z.target == pytest.approx(1.0, abs=1e-4) and z.estimate.value == 1.0


@pytest.mark.parametrize("f", ["one", "volume", "u1"])
def test_typical_identity_small(f):
    r = E.check_typical_identity(f, G4, 400, 3)
    assert r.passed, r.to_dict()


def test_typical_identity_indicator():
    r = E.check_typical_identity("indicator", G4, 400, 4, a=1.0)
    assert r.passed
    with pytest.raises(ValueError):
        E.check_typical_identity("indicator", G4, 10, 4)


def test_voronoi_tail_small_and_monotone_target():
    r = E.check_voronoi_tail(0.3, 20 / (4 * math.pi), 2, 20_000, 1)
    assert r.target == pytest.approx(math.exp(-1.74664), abs=1e-6)
    assert r.passed
    assert E.voronoi_tail_target(1e-8, 1.0, 2) == pytest.approx(1.0)
    t = [E.voronoi_tail_target(a, g, 2) for a, g in [(0.2, 1.0), (0.3, 1.0), (0.3, 2.0)]]
    assert t[0] > t[1] > t[2]
    with pytest.raises(ValueError):
        E.check_voronoi_tail(2.0, 1.0, 2, 10, 1)


def test_estimators_deterministic_across_threads(monkeypatch):
    a = E.check_voronoi_tail(0.3, 1.5, 2, 9000, 11)
    monkeypatch.setenv("SPHERTESS_THREADS", "3")
    b = E.check_voronoi_tail(0.3, 1.5, 2, 9000, 11)
    assert a.rows() == b.rows()
