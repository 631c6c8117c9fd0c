"""Explicit constants of the stability inequalities, the h_m family,
Schlaefli's cell count, and verifiers that compare functionals against
the resulting lower bounds."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .functionals import (DeviationOptions, U1, U_tilde, centred_circumradius, centred_inradius,
                          delta2, inradius_free, theta_r, volume)
from .montecarlo import Estimate, combined_stderr
from .sphere_core import Cap, cap_U1, cap_radius_for_volume, cap_volume, omega, sine_integral_D
from .spherical_convex import HPolytope, ImproperError, VPolytope, vertices

Z_SIGMA = 3.0


def _binom2(d: int) -> float:
    return d * (d + 1) / 2


def beta_stability(alpha0: float, alphaC: float, d: int) -> float:
    """Stability constant for U_1 against Delta_2 at equal volume (two-argument minimum)."""
    if not 0 < alpha0 <= alphaC < math.pi / 2:
        raise ValueError("need 0 < alpha0 <= alphaC < pi/2")
    b = _binom2(d)
    t = math.tan(alphaC)
    first = (b * math.sin(alpha0) ** (d + 1) * t ** (-2 * d)
             / (d + d * b * (math.pi / 2) ** 2 * t ** (-d)))
    second = (2 / math.pi) ** 2 * sine_integral_D(d, math.pi / 2 - alphaC)
    return 2 * min(first, second)


def beta_remark_bound(alpha0: float, alphaC: float, d: int) -> float:
    """Simplified lower bound for :func:`beta_stability` (read as a two-argument minimum)."""
    t = math.tan(alphaC)
    return min(math.sin(alpha0) ** (d + 1) / (t ** (2 * d) + 2 * d * t ** d),
               0.4 ** d * (math.pi / 2 - alphaC) ** d)


def c_inradius(a: float, d: int) -> float:
    """Lower bound (1/8)(3 pi^-4)^{d-1} a^{d-2} (pi/2 - a)^{d-1} for the inradius stability constant."""
    if not 0 < a < math.pi / 2:
        raise ValueError("need a in (0, pi/2)")
    return 0.125 * (3 * math.pi ** -4) ** (d - 1) * a ** (d - 2) * (math.pi / 2 - a) ** (d - 1)


def c_inradius_simple(a: float, d: int) -> float:
    """The cruder bound 4 * 0.03^d a^{d-2} (pi/2 - a)^{d-1}."""
    return 4 * 0.03 ** d * a ** (d - 2) * (math.pi / 2 - a) ** (d - 1)


def c_voronoi(a: float, d: int) -> float:
    """Lower bound (2 pi)^{-2d} a^{-1} min(a, pi/2 - a)^{d-1} for the Voronoi stability constant."""
    if not 0 < a < math.pi / 2:
        raise ValueError("need a in (0, pi/2)")
    return (2 * math.pi) ** (-2 * d) / a * min(a, math.pi / 2 - a) ** (d - 1)


def beta_bar(a: float, d: int) -> float:
    """epsilon-free factor of the volume-deviation exponent; a is a volume in (0, omega_{d+1}/2)."""
    w1, w = omega(d + 1), omega(d)
    if not 0 < a < w1 / 2:
        raise ValueError(f"need a in (0, {w1 / 2})")
    alpha0 = cap_radius_for_volume(d, a)
    b = _binom2(d)
    q = w1 / (2 * math.pi * w)
    first = (b * math.sin(alpha0) ** (d + 1) * q ** (2 * d)
             / (d + d * b * (math.pi / 2) ** 2 * math.tan(alpha0) ** (-d)))
    second = (2 / math.pi) ** (d + 1) * w1 ** d / (d * (2 * math.pi * w) ** d)
    return 2 * min(first, second)


def h_m(m: int, t):
    """h_m(t) = (-1)^{m+1} e^{-t} + 2 sum_{i <= m/2} t^{m-2i} / (m-2i)!."""
    if m < 0:
        raise ValueError("m must be >= 0")
    ta = np.asarray(t, dtype=float)
    if np.any(ta < 0):
        raise ValueError("t must be >= 0")
    out = (-1) ** (m + 1) * np.exp(-ta)
    for i in range(m // 2 + 1):
        k = m - 2 * i
        out = out + 2 * ta ** k / math.factorial(k)
    return float(out) if out.ndim == 0 else out


def schlafli_count(d: int, k: int) -> int:
    """Cells cut from S^d by k great subspheres in general position (N(0) = 1)."""
    if k < 0 or d < 1:
        raise ValueError("need k >= 0 and d >= 1")
    if k == 0:
        return 1
    return 2 * sum(math.comb(k - 1, i) for i in range(d + 1))


@dataclass(frozen=True)
class StabilityFloor:
    """Plug-in record (1 + f) * tau for an externally supplied modulus f."""

    a: float
    epsilon: float
    f: float
    tau: float

    @property
    def floor(self) -> float:
        return (1 + self.f) * self.tau


def stability_floor(a: float, epsilon: float, f: float, tau_value: float) -> StabilityFloor:
    if f < 0:
        raise ValueError("modulus must be non-negative")
    return StabilityFloor(a, epsilon, min(f, 1.0), tau_value)


# --- verifiers ------------------------------------------------------------------

class Verdict(str, Enum):
    HOLDS = "holds"
    HOLDS_WITHIN_ERROR = "holds-within-error"
    VIOLATED = "violated"
    INCONCLUSIVE = "inconclusive-upper-bound-deviation"
    PRECONDITION = "precondition-failed"


class StabilityKind(str, Enum):
    URYSOHN = "Urysohn"
    VOLUME_DELTA2 = "VolumeDelta2"
    INRADIUS_THETA_R = "InradiusThetaR"
    VORONOI_THETA_O = "VoronoiThetaO"


@dataclass
class StabilityReport:
    body_id: str
    kind: str
    lhs: Estimate
    rhs: Estimate
    constant: float
    deviation: float
    verdict: Verdict
    note: str = ""

    @property
    def margin(self) -> float:
        return self.lhs.value - self.rhs.value

    @property
    def conclusive_violation(self) -> bool:
        return self.verdict is Verdict.VIOLATED

    def to_dict(self) -> dict:
        return {"body_id": self.body_id, "kind": self.kind, "lhs": self.lhs.to_dict(),
                "rhs": self.rhs.to_dict(), "constant": self.constant,
                "deviation": self.deviation, "verdict": self.verdict.value, "note": self.note}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    CSV_COLUMNS = ("body_id", "kind", "lhs", "lhs_se", "rhs", "rhs_se", "verdict")

    def csv_row(self) -> list[str]:
        f = lambda x: format(float(x), ".17g")
        return [self.body_id, self.kind, f(self.lhs.value), f(self.lhs.stderr),
                f(self.rhs.value), f(self.rhs.stderr), self.verdict.value]

    def to_csv(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\r\n").writerow(self.csv_row())
        return buf.getvalue()


def _verdict(lhs: Estimate, rhs: Estimate, upper_bound_deviation: bool = False) -> Verdict:
    slack = Z_SIGMA * combined_stderr(lhs, rhs)
    if lhs.value - slack >= rhs.value and lhs.value > rhs.value:
        return Verdict.HOLDS
    if lhs.value + slack >= rhs.value:
        return Verdict.HOLDS_WITHIN_ERROR
    return Verdict.INCONCLUSIVE if upper_bound_deviation else Verdict.VIOLATED


def _volume_and_radius(P, n, seed):
    vol = volume(P, n, seed, exact=True)
    d = P.dim
    return vol, cap_radius_for_volume(d, min(vol.value, omega(d + 1)))


def verify_urysohn(P, n: int = 20000, seed: int = 0, body_id: str = "") -> StabilityReport:
    """U_1(P) against U_1 of the cap with the same volume."""
    d = P.dim
    if isinstance(P, HPolytope):
        rep = vertices(P, report=True)
        if not rep.line_free:
            raise ImproperError("body is not proper")
    vol, alpha_c = _volume_and_radius(P, n, seed + 1)
    lhs = U1(P, n, seed)
    rhs = Estimate.exact(cap_U1(d, min(alpha_c, math.pi / 2)))
    return StabilityReport(body_id, StabilityKind.URYSOHN.value, lhs, rhs, 1.0, 0.0,
                           _verdict(lhs, rhs))


def verify_stability(kind, P, params: dict | None = None, n: int = 20000, seed: int = 0,
                     body_id: str = "") -> StabilityReport:
    """Compare the hitting functional of P against the kind's stability lower bound.

    params: ``alpha0`` (VolumeDelta2, defaults to the equal-volume radius),
    ``a`` and ``epsilon`` (threshold kinds; default to the body's own radius
    and deviation, epsilon capped at 1), ``origin`` (VoronoiThetaO),
    ``deviation_options``.
    """
    kind = StabilityKind(kind)
    params = dict(params or {})
    d = P.dim

    def pre(msg):
        nan = Estimate.exact(float("nan"))
        return StabilityReport(body_id, kind.value, nan, nan, float("nan"), float("nan"),
                               Verdict.PRECONDITION, msg)

    if kind is StabilityKind.VOLUME_DELTA2:
        vol, alpha_c = _volume_and_radius(P, n, seed + 1)
        if vol.value <= 0:
            return pre("zero volume")
        if alpha_c >= math.pi / 2:
            return pre("volume at least a hemisphere")
        alpha0 = params.get("alpha0", alpha_c)
        beta = beta_stability(alpha0, alpha_c, d)
        dev = 0.0 if isinstance(P, Cap) else delta2(P, params.get("deviation_options", DeviationOptions()))
        lhs = U1(P, n, seed)
        base = cap_U1(d, alpha_c)
        rhs = Estimate.exact((1 + beta * dev ** 2) * base)
        verdict = _verdict(lhs, rhs, upper_bound_deviation=dev > 0)
        if verdict is Verdict.INCONCLUSIVE and _verdict(lhs, Estimate.exact(base)) is Verdict.VIOLATED:
            # fails even with zero deviation: a genuine violation
            verdict = Verdict.VIOLATED
        return StabilityReport(body_id, kind.value, lhs, rhs, beta, dev, verdict)

    if kind is StabilityKind.INRADIUS_THETA_R:
        r, _ = inradius_free(P)
        dev = theta_r(P)
        a = params.get("a", r)
        eps = params.get("epsilon", min(dev, 1.0))
        if not (0 < a < math.pi / 2):
            return pre("need a in (0, pi/2)")
        if r < a - 1e-12 or dev < eps - 1e-12 or eps > 1:
            return pre("size or deviation threshold not met")
        const = c_inradius(a, d)
        lhs = U1(P, n, seed)
        rhs = Estimate.exact((1 + const * eps ** ((d + 1) / 2)) * cap_U1(d, a))
        return StabilityReport(body_id, kind.value, lhs, rhs, const, dev, _verdict(lhs, rhs))

    e = np.asarray(params.get("origin", np.eye(d + 1)[0]), dtype=float)
    if isinstance(P, Cap):
        if not P.contains(e) or geodesic_ok(P, e) is False:
            return pre("origin not in body or body not in hemisphere")
        V = P
    else:
        if not bool(np.all(P.normals @ e >= -1e-12)):
            return pre("origin not in body")
        rep = vertices(P, report=True)
        if not rep.line_free or np.min(rep.polytope.vertices @ e) < -1e-9:
            return pre("body not inside the closed hemisphere of the origin")
        V = rep.polytope
    r = centred_inradius(P, e)
    dev = centred_circumradius(V, e) - r
    a = params.get("a", r)
    eps = params.get("epsilon", min(dev, 1.0))
    if not (0 < a < math.pi / 2):
        return pre("need a in (0, pi/2)")
    if r < a - 1e-12 or dev < eps - 1e-12 or eps > 1:
        return pre("size or deviation threshold not met")
    const = c_voronoi(a, d)
    lhs = U_tilde(V, e, n, seed, check=False)
    rhs = Estimate.exact((1 + const * eps ** ((d + 1) / 2)) * cap_volume(d, 2 * a))
    return StabilityReport(body_id, kind.value, lhs, rhs, const, dev, _verdict(lhs, rhs))


def geodesic_ok(cap: Cap, e) -> bool:
    """Cap lies in the closed hemisphere of e."""
    dist = math.acos(max(-1.0, min(1.0, float(np.dot(cap.center, e)))))
    return dist + cap.radius <= math.pi / 2 + 1e-12
