"""Monte Carlo checks of the probabilistic statements about the random cells.

Every estimator is a pure function of its arguments and the seed: samples are
drawn in fixed blocks (see :mod:`sphertess.montecarlo`), so results do not
depend on the thread count.  Each result exposes ``COLUMNS``, ``rows()`` for
the CSV writer and ``to_dict()`` for the JSON summary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import stats

from . import montecarlo as mc
from .constants import h_m, schlafli_count
from .functionals import (DeviationOptions, SizeKind, SizeSpec, TauModel, U1, U1_perimeter,
                          U_tilde, canonical_deviation, centred_inradius, delta2, inradius_free,
                          tau, volume)
from .montecarlo import Estimate
from .processes import (DegenerateError, crofton_area_s2, crofton_cell, sample_tessellation,
                        typical_cell, voronoi_typical_cell)
from .sphere_core import cap_volume, geodesic_distance, omega, origin, sample_uniform
from .spherical_convex import HPolytope, polygon_area, vertices

__all__ = [
    "Model", "Deviation", "wilson_interval", "derive_seed", "ConditionalEstimate",
    "estimate_conditional_deviation", "LowerBoundReport", "check_zero_cell_lower_bound",
    "RatePoint", "RateCurve", "estimate_rate", "CellCountReport", "check_cell_count",
    "IdentityReport", "check_typical_identity", "TailReport", "check_voronoi_tail",
    "tau_for_size", "STARVED_BELOW", "Z_SIGMA",
]

Z_SIGMA = 3.0
STARVED_BELOW = 10
# two-sided coverage of +-3 sigma
LEVEL_3SIGMA = 2 * stats.norm.cdf(Z_SIGMA) - 1
# absolute slack for comparisons that are exact up to float rounding
ROUNDING = 1e-9


class Model(str, Enum):
    HYPERPLANE_CROFTON = "HyperplaneCrofton"
    HYPERPLANE_TYPICAL = "HyperplaneTypical"
    VORONOI_TYPICAL = "VoronoiTypical"


class Deviation(str, Enum):
    DELTA2 = "Delta2"
    THETA_R = "ThetaR"
    THETA_O = "ThetaO"
    CANONICAL = "Canonical"


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for k successes in n trials; [0, 1] when n = 0."""
    if n == 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def derive_seed(seed: int, *path: int) -> int:
    """Independent child seed for a sub-experiment (grid point, estimator side)."""
    ss = np.random.SeedSequence([int(seed) % 2**64, *map(int, path)])
    return int(ss.generate_state(1, np.uint64)[0])


def _g(x) -> str:
    return format(float(x), ".17g")


def tau_for_size(kind, d: int, a: float) -> float:
    """tau(2 U_1, Sigma, a) for the hyperplane models."""
    kind = SizeKind(kind)
    model = TauModel.VOLUME_U1 if kind is SizeKind.VOLUME else TauModel.INRADIUS_U1
    return tau(model, d, a)


# --- Crofton cells without building polytopes -----------------------------------

def _poisson_batch(rng, lam: float, d: int, m: int) -> list[np.ndarray]:
    counts = rng.poisson(lam, m)
    pts = sample_uniform(rng, d, int(counts.sum())).reshape(-1, d + 1)
    return np.split(pts, np.cumsum(counts)[:-1])


def _crofton_size(points: np.ndarray, size: SizeSpec, d: int, size_samples: int,
                  seed: int) -> float:
    if size.kind is SizeKind.VOLUME:
        if d == 2:
            return crofton_area_s2(points)
        return volume(crofton_cell(points), size_samples, seed).value
    if size.kind is SizeKind.CENTRED_INRADIUS and np.allclose(size.origin, origin(d)):
        if len(points) == 0:
            return math.pi / 2
        m = float(np.min(np.abs(points[:, 0])))
        if m < 1e-12:
            raise DegenerateError("a great subsphere passes through the origin")
        return math.asin(min(m, 1.0))
    return size.evaluate(crofton_cell(points), size_samples, seed)


def _crofton_sizes(rng, gamma_s: float, d: int, m: int, size: SizeSpec,
                   size_samples: int = 20000) -> np.ndarray:
    """Sizes of m independent Crofton cells; degenerate draws are redrawn, within a 1% budget."""
    lam = gamma_s * omega(d + 1)
    out = np.empty(m)
    budget = max(10, m // 100)
    for i, pts in enumerate(_poisson_batch(rng, lam, d, m)):
        while True:
            try:
                out[i] = _crofton_size(pts, size, d, size_samples, int(rng.integers(2**63)))
                break
            except DegenerateError:
                budget -= 1
                if budget < 0:
                    raise DegenerateError("degeneracy budget exceeded")
                pts = sample_uniform(rng, d, int(rng.poisson(lam))).reshape(-1, d + 1)
    return out


# --- conditional deviation probabilities ---------------------------------------

def _line_free(P: HPolytope):
    if P.is_whole_sphere:
        return None
    rep = vertices(P, report=True)
    return rep.polytope if rep.line_free and len(rep.polytope) else None


def _theta(P: HPolytope, e, r: float) -> float:
    """R_e - r_e, with R_e = pi for bodies that are not line-free."""
    V = _line_free(P)
    R = float(np.max(geodesic_distance(V.vertices, e))) if V is not None else math.pi
    return R - r


@dataclass
class ConditionalEstimate:
    model: str
    deviation: str
    size: str
    a: float
    epsilon: float
    gamma_s: float
    d: int
    n: int
    successes: int
    joint: int
    improper: int
    rejected: int
    seed: int

    COLUMNS = ("model", "deviation", "size", "a", "epsilon", "gamma_s", "n", "successes",
               "joint", "p_hat", "ci_low", "ci_high", "flagged")

    @property
    def p_hat(self) -> float:
        return self.joint / self.successes if self.successes else float("nan")

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.joint, self.successes)

    @property
    def flagged(self) -> bool:
        return self.successes == 0

    @property
    def marginal(self) -> float:
        return self.successes / self.n

    def rows(self) -> list[list[str]]:
        lo, hi = self.ci
        return [[self.model, self.deviation, self.size, _g(self.a), _g(self.epsilon),
                 _g(self.gamma_s), str(self.n), str(self.successes), str(self.joint),
                 _g(self.p_hat), _g(lo), _g(hi), str(self.flagged).lower()]]

    def to_dict(self) -> dict:
        lo, hi = self.ci
        return {"model": self.model, "deviation": self.deviation, "size": self.size,
                "a": self.a, "epsilon": self.epsilon, "gamma_s": self.gamma_s, "d": self.d,
                "n": self.n, "successes": self.successes, "joint": self.joint,
                "improper": self.improper, "rejected": self.rejected,
                "p_hat": self.p_hat, "ci95": [lo, hi], "flagged": self.flagged,
                "seed": self.seed,
                "note": "upper bounds with non-explicit constants are checked only as decay in gamma_s"}


def _draw_body(model: Model, gamma_s: float, d: int, rng) -> tuple[HPolytope, int]:
    if model is Model.HYPERPLANE_CROFTON:
        rejected = 0
        while True:
            try:
                return crofton_cell(sample_uniform(rng, d, int(rng.poisson(gamma_s * omega(d + 1))))
                                    .reshape(-1, d + 1)), rejected
            except DegenerateError:
                rejected += 1
                if rejected > 100:
                    raise DegenerateError("degeneracy budget exceeded")
    if model is Model.HYPERPLANE_TYPICAL:
        tess, rejected = sample_tessellation(gamma_s, d, rng)
        return typical_cell(tess, rng), rejected
    return voronoi_typical_cell(gamma_s, d, rng), 0


def _deviation_value(dev: Deviation, model: Model, P: HPolytope, size: SizeSpec, a: float,
                     opts: DeviationOptions, phi_samples: int, seed: int) -> tuple[float, bool]:
    """Deviation of P and whether P is improper (not line-free)."""
    d = P.dim
    o = origin(d)
    improper = _line_free(P) is None
    if dev is Deviation.DELTA2:
        return (math.inf, True) if improper else (delta2(P, opts), False)
    if dev is Deviation.THETA_R:
        r, e = inradius_free(P)
        return _theta(P, e, r), improper
    if dev is Deviation.THETA_O:
        return _theta(P, o, centred_inradius(P, o)), improper
    if model is Model.VORONOI_TYPICAL:
        t = tau(TauModel.VORONOI_INRADIUS, d, a)
        if improper:
            return math.inf, True
        phi = U_tilde(P, o, phi_samples, seed, check=False).value / omega(d + 1)
    else:
        t = tau_for_size(size.kind, d, a)
        if d == 2:
            phi = 2 * U1_perimeter(P)
        else:
            phi = 1.0 if improper else 2 * U1(P, phi_samples, seed).value
    return canonical_deviation(phi, t), improper


def estimate_conditional_deviation(model, size: SizeSpec, dev, a: float, epsilon: float,
                                   gamma_s: float, n: int, seed: int, d: int = 2,
                                   opts: DeviationOptions = DeviationOptions(grid=128),
                                   size_samples: int = 20000,
                                   phi_samples: int = 20000) -> ConditionalEstimate:
    """P(dev(Z) >= epsilon | Sigma(Z) >= a) by rejection.

    Bodies that are not line-free count as deviating when the deviation is
    undefined for them (Delta_2, canonical Voronoi) and use R = pi otherwise.
    """
    model, dev = Model(model), Deviation(dev)
    if n < 1:
        raise ValueError("need n >= 1")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if model is Model.VORONOI_TYPICAL and size.kind is not SizeKind.CENTRED_INRADIUS:
        raise ValueError("the Voronoi model is conditioned on the centred inradius")
    if model is Model.HYPERPLANE_TYPICAL and d != 2:
        raise ValueError("typical hyperplane cells need full enumeration (d = 2)")

    def block(rng, m):
        succ = joint = improper = rejected = 0
        for _ in range(m):
            P, rej = _draw_body(model, gamma_s, d, rng)
            rejected += rej
            sub = int(rng.integers(2**63))
            if size.evaluate(P, size_samples, sub) < a:
                continue
            succ += 1
            value, imp = _deviation_value(dev, model, P, size, a, opts, phi_samples, sub)
            improper += imp
            joint += value >= epsilon
        return succ, joint, improper, rejected

    parts = mc.run_blocks(block, n, seed)
    s, j, imp, rej = (sum(p[i] for p in parts) for i in range(4))
    return ConditionalEstimate(model.value, dev.value, size.kind.value, a, epsilon, gamma_s, d,
                               n, s, j, imp, rej, seed)


# --- exact lower bound and rate ---------------------------------------------------

def _tail_count(size: SizeSpec, a: float, gamma_s: float, d: int, n: int, seed: int,
                size_samples: int) -> int:
    def block(rng, m):
        return int(np.count_nonzero(_crofton_sizes(rng, gamma_s, d, m, size, size_samples) >= a))

    return sum(mc.run_blocks(block, n, seed))


@dataclass
class LowerBoundReport:
    size: str
    a: float
    gamma_s: float
    d: int
    estimate: Estimate
    successes: int
    rhs: float

    COLUMNS = ("size", "a", "gamma_s", "n", "p_hat", "stderr", "ci_low", "ci_high", "rhs", "pass")

    @property
    def ci(self):
        return wilson_interval(self.successes, self.estimate.n)

    @property
    def passed(self) -> bool:
        return self.estimate.value + Z_SIGMA * self.estimate.stderr + ROUNDING >= self.rhs

    def rows(self):
        lo, hi = self.ci
        e = self.estimate
        return [[self.size, _g(self.a), _g(self.gamma_s), str(e.n), _g(e.value), _g(e.stderr),
                 _g(lo), _g(hi), _g(self.rhs), str(self.passed).lower()]]

    def to_dict(self):
        return {"size": self.size, "a": self.a, "gamma_s": self.gamma_s, "d": self.d,
                "estimate": self.estimate.to_dict(), "ci95": list(self.ci), "rhs": self.rhs,
                "pass": self.passed}


def check_zero_cell_lower_bound(size: SizeSpec, a: float, gamma_s: float, n: int, seed: int,
                                d: int = 2, size_samples: int = 20000) -> LowerBoundReport:
    """P(Sigma(Z_0) >= a) against exp(-gamma_s omega_{d+1} tau(a))."""
    rhs = math.exp(-gamma_s * omega(d + 1) * tau_for_size(size.kind, d, a))
    k = _tail_count(size, a, gamma_s, d, n, seed, size_samples)
    est = mc.merge_counts([k], n, seed)
    return LowerBoundReport(size.kind.value, a, gamma_s, d, est, k, rhs)


@dataclass
class RatePoint:
    gamma_s: float
    n: int
    successes: int
    rhs: float

    @property
    def p_hat(self) -> float:
        return self.successes / self.n

    @property
    def stderr(self) -> float:
        return mc.merge_counts([self.successes], self.n, None).stderr

    @property
    def ci(self):
        return wilson_interval(self.successes, self.n)

    @property
    def rate(self) -> float:
        return math.log(self.p_hat) / self.gamma_s if self.successes else -math.inf

    @property
    def starved(self) -> bool:
        return self.successes < STARVED_BELOW

    @property
    def bound_ok(self) -> bool:
        return self.p_hat + Z_SIGMA * self.stderr + ROUNDING >= self.rhs


@dataclass
class RateCurve:
    size: str
    a: float
    d: int
    target: float
    points: list[RatePoint] = field(default_factory=list)
    seed: int = 0

    COLUMNS = ("gamma_s", "n", "successes", "p_hat", "stderr", "ci_low", "ci_high", "rate",
               "target", "bound_rhs", "bound_ok", "starved")

    def _usable(self):
        return [p for p in self.points if not p.starved]

    @property
    def decreasing(self) -> bool:
        r = [p.rate for p in self._usable()]
        return len(r) >= 2 and all(x > y for x, y in zip(r, r[1:]))

    @property
    def approaching(self) -> bool:
        gap = [abs(p.rate - self.target) for p in self._usable()]
        return len(gap) >= 2 and all(x > y for x, y in zip(gap, gap[1:]))

    def final_within(self, rel: float) -> bool:
        u = self._usable()
        return bool(u) and abs(u[-1].rate - self.target) <= rel * abs(self.target)

    @property
    def bound_ok(self) -> bool:
        return all(p.bound_ok for p in self.points)

    def rows(self):
        out = []
        for p in self.points:
            lo, hi = p.ci
            out.append([_g(p.gamma_s), str(p.n), str(p.successes), _g(p.p_hat), _g(p.stderr),
                        _g(lo), _g(hi), _g(p.rate), _g(self.target), _g(p.rhs),
                        str(p.bound_ok).lower(), str(p.starved).lower()])
        return out

    def to_dict(self):
        return {"size": self.size, "a": self.a, "d": self.d, "target": self.target,
                "seed": self.seed,
                "points": [{"gamma_s": p.gamma_s, "n": p.n, "successes": p.successes,
                            "p_hat": p.p_hat, "ci95": list(p.ci), "rate": p.rate,
                            "starved": p.starved, "bound_ok": p.bound_ok} for p in self.points],
                "decreasing": self.decreasing, "approaching": self.approaching,
                "final_within_20pct": self.final_within(0.2), "bound_ok": self.bound_ok}


def estimate_rate(size: SizeSpec, a: float, gammas, n: int, seed: int, d: int = 2,
                  size_samples: int = 20000) -> RateCurve:
    """gamma_s^{-1} ln P(Sigma(Z_0) >= a) along an increasing intensity grid."""
    gammas = [float(g) for g in gammas]
    if any(g <= 0 for g in gammas) or any(x >= y for x, y in zip(gammas, gammas[1:])):
        raise ValueError("intensity grid must be positive and increasing")
    t = tau_for_size(size.kind, d, a)
    curve = RateCurve(size.kind.value, a, d, -omega(d + 1) * t, seed=seed)
    for i, g in enumerate(gammas):
        k = _tail_count(size, a, g, d, n, derive_seed(seed, i), size_samples)
        curve.points.append(RatePoint(g, n, k, math.exp(-g * omega(d + 1) * t)))
    return curve


# --- cell count and typical-cell identity (d = 2) --------------------------------

@dataclass
class CellCountReport:
    gamma_s: float
    estimate: Estimate
    target: float
    rejected: int
    mismatches: int

    COLUMNS = ("gamma_s", "n", "mean", "stderr", "target", "rejected", "mismatches", "pass")

    @property
    def rejection_rate(self) -> float:
        return self.rejected / (self.estimate.n + self.rejected)

    @property
    def passed(self) -> bool:
        e = self.estimate
        return (abs(e.value - self.target) <= Z_SIGMA * e.stderr + ROUNDING
                and self.rejection_rate <= 0.01 and self.mismatches == 0)

    def rows(self):
        e = self.estimate
        return [[_g(self.gamma_s), str(e.n), _g(e.value), _g(e.stderr), _g(self.target),
                 str(self.rejected), str(self.mismatches), str(self.passed).lower()]]

    def to_dict(self):
        return {"gamma_s": self.gamma_s, "estimate": self.estimate.to_dict(),
                "target": self.target, "rejected": self.rejected,
                "rejection_rate": self.rejection_rate, "mismatches": self.mismatches,
                "pass": self.passed}


def check_cell_count(gamma_s: float, n: int, seed: int, d: int = 2) -> CellCountReport:
    """Mean number of cells against h_d(gamma_s omega_{d+1})."""
    if d != 2:
        raise ValueError("cell enumeration is implemented for d = 2")

    def block(rng, m):
        counts = np.empty(m)
        rejected = mismatches = 0
        for i in range(m):
            tess, rej = sample_tessellation(gamma_s, d, rng)
            rejected += rej
            counts[i] = len(tess)
            mismatches += len(tess) != schlafli_count(d, len(tess.generators))
        return math.fsum(counts), math.fsum(counts * counts), rejected, mismatches

    parts = mc.run_blocks(block, n, seed)
    est = mc.merge_moments([p[:2] for p in parts], n, seed)
    target = float(h_m(d, gamma_s * omega(d + 1)))
    return CellCountReport(gamma_s, est, target, sum(p[2] for p in parts),
                           sum(p[3] for p in parts))


@dataclass
class IdentityReport:
    functional: str
    gamma_s: float
    lhs: Estimate
    rhs: Estimate
    rejected: int = 0

    COLUMNS = ("functional", "gamma_s", "n", "lhs", "lhs_se", "rhs", "rhs_se", "pass")

    @property
    def passed(self) -> bool:
        return abs(self.lhs.value - self.rhs.value) <= (
            Z_SIGMA * mc.combined_stderr(self.lhs, self.rhs) + ROUNDING)

    def rows(self):
        return [[self.functional, _g(self.gamma_s), str(self.lhs.n), _g(self.lhs.value),
                 _g(self.lhs.stderr), _g(self.rhs.value), _g(self.rhs.stderr),
                 str(self.passed).lower()]]

    def to_dict(self):
        return {"functional": self.functional, "gamma_s": self.gamma_s,
                "lhs": self.lhs.to_dict(), "rhs": self.rhs.to_dict(),
                "rejected": self.rejected, "pass": self.passed}


IDENTITY_FUNCTIONALS = ("one", "volume", "u1", "indicator")


def _identity_f(name: str, a: float | None):
    if name == "one":
        return lambda P, area: 1.0
    if name == "volume":
        return lambda P, area: area
    if name == "u1":
        return lambda P, area: U1_perimeter(P)
    if name == "indicator":
        if a is None:
            raise ValueError("the indicator functional needs a volume level a")
        return lambda P, area: float(area >= a)
    raise ValueError(f"unknown functional {name!r}; choose from {IDENTITY_FUNCTIONALS}")


def check_typical_identity(f: str, gamma_s: float, n: int, seed: int, d: int = 2,
                           a: float | None = None) -> IdentityReport:
    """E f(Z_0) by Crofton cells against (1/omega) E sum_K f(K) sigma(K) over whole tessellations."""
    if d != 2:
        raise ValueError("cell enumeration is implemented for d = 2")
    fn = _identity_f(f, a)
    w = omega(d + 1)

    def left(rng, m):
        vals = np.empty(m)
        for i, pts in enumerate(_poisson_batch(rng, gamma_s * w, d, m)):
            P = crofton_cell(pts)
            vals[i] = fn(P, crofton_area_s2(pts))
        return math.fsum(vals), math.fsum(vals * vals)

    def right(rng, m):
        vals = np.empty(m)
        rejected = 0
        for i in range(m):
            tess, rej = sample_tessellation(gamma_s, d, rng)
            rejected += rej
            areas = [polygon_area(c) for c in tess.cells]
            vals[i] = math.fsum(fn(c, s) * s for c, s in zip(tess.cells, areas)) / w
        return math.fsum(vals), math.fsum(vals * vals), rejected

    lhs = mc.merge_moments(mc.run_blocks(left, n, derive_seed(seed, 0)), n, seed)
    parts = mc.run_blocks(right, n, derive_seed(seed, 1))
    rhs = mc.merge_moments([p[:2] for p in parts], n, seed)
    return IdentityReport(f, gamma_s, lhs, rhs, sum(p[2] for p in parts))


# --- Voronoi inradius tail ---------------------------------------------------------

@dataclass
class TailReport:
    a: float
    gamma_s: float
    d: int
    n: int
    successes: int
    target: float

    COLUMNS = ("a", "gamma_s", "d", "n", "successes", "p_hat", "ci95_low", "ci95_high",
               "ci3_low", "ci3_high", "target", "pass")

    @property
    def p_hat(self) -> float:
        return self.successes / self.n

    @property
    def band(self):
        return wilson_interval(self.successes, self.n, LEVEL_3SIGMA)

    @property
    def passed(self) -> bool:
        lo, hi = self.band
        return lo <= self.target <= hi

    def rows(self):
        lo, hi = wilson_interval(self.successes, self.n)
        blo, bhi = self.band
        return [[_g(self.a), _g(self.gamma_s), str(self.d), str(self.n), str(self.successes),
                 _g(self.p_hat), _g(lo), _g(hi), _g(blo), _g(bhi), _g(self.target),
                 str(self.passed).lower()]]

    def to_dict(self):
        return {"a": self.a, "gamma_s": self.gamma_s, "d": self.d, "n": self.n,
                "successes": self.successes, "p_hat": self.p_hat,
                "ci95": list(wilson_interval(self.successes, self.n)),
                "band_3sigma": list(self.band), "target": self.target, "pass": self.passed}


def voronoi_tail_target(a: float, gamma_s: float, d: int) -> float:
    return math.exp(-gamma_s * cap_volume(d, 2 * a))


def check_voronoi_tail(a: float, gamma_s: float, d: int, n: int, seed: int) -> TailReport:
    """Fraction of typical Voronoi cells with r_o >= a against exp(-gamma_s sigma_d(B(o, 2a)))."""
    if not 0 < a < math.pi / 2:
        raise ValueError("need a in (0, pi/2)")
    o = origin(d)

    def block(rng, m):
        return sum(centred_inradius(voronoi_typical_cell(gamma_s, d, rng), o) >= a
                   for _ in range(m))

    k = int(sum(mc.run_blocks(block, n, seed)))
    return TailReport(a, gamma_s, d, n, k, voronoi_tail_target(a, gamma_s, d))
