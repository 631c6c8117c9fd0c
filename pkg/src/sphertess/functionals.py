"""Size, hitting and deviation functionals of spherical convex bodies."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import ConvexHull

from . import montecarlo as mc
from .montecarlo import Estimate
from .sphere_core import (Cap, cap_U1, cap_radius_for_volume, cap_volume, geodesic_distance,
                          omega, origin, sample_uniform, sine_integral_D, tangent_basis)
from .spherical_convex import (HPolytope, ImproperError, InfeasibleError, VPolytope, contains,
                               hits_great_subsphere, max_min_direction, polar, polygon_area,
                               polygon_perimeter, radial_function, spherical_hull_cycle,
                               tangent_directions, to_hpolytope, vertices)

__all__ = [
    "Estimate", "SizeKind", "SizeSpec", "volume", "U1", "U1_perimeter", "U1_exact_via_polar",
    "U_tilde", "centred_inradius", "centred_circumradius", "inradius_free", "maxinr_holds",
    "circumcenter", "DeviationOptions", "delta2", "delta0", "deviation_profile", "theta_r",
    "theta_centred", "canonical_deviation", "TauModel", "tau", "cap_radius_for_volume",
]


class SizeKind(str, Enum):
    VOLUME = "Volume"
    INRADIUS = "Inradius"
    CENTRED_INRADIUS = "CentredInradius"


@dataclass(frozen=True)
class SizeSpec:
    kind: SizeKind
    origin: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SizeKind(self.kind))
        if self.kind is SizeKind.CENTRED_INRADIUS and self.origin is None:
            raise ValueError("CentredInradius needs an origin")

    def evaluate(self, P, n: int = 20000, seed: int = 0) -> float:
        """Size of P; volumes are exact on S^2 and Monte Carlo otherwise."""
        if self.kind is SizeKind.VOLUME:
            return volume(P, n, seed, exact=True).value
        if self.kind is SizeKind.INRADIUS:
            return inradius_free(P)[0]
        if not _contains_any(P, self.origin):
            return 0.0
        return centred_inradius(P, self.origin)


def _contains_any(P, y) -> bool:
    if isinstance(P, Cap):
        return P.contains(y)
    return bool(contains(P, y))


def _as_vpolytope(K) -> VPolytope:
    if isinstance(K, VPolytope):
        return K
    if isinstance(K, HPolytope):
        rep = vertices(K, report=True)
        if not rep.line_free:
            raise ImproperError("body is not line-free; no finite vertex description")
        return rep.polytope
    return VPolytope(np.atleast_2d(K))


# --- volume and hitting functionals ---------------------------------------

def volume(K, n: int = 100_000, seed: int = 0, exact: bool = False) -> Estimate:
    """sigma_d(K) by uniform hit-or-miss; exact for caps, the whole sphere and (with exact=True) d = 2."""
    if isinstance(K, Cap):
        return Estimate.exact(cap_volume(K.dim, K.radius))
    if isinstance(K, VPolytope):
        K = to_hpolytope(K)
    d = K.dim
    if K.is_whole_sphere:
        return Estimate.exact(omega(d + 1))
    if exact and d == 2:
        return Estimate.exact(polygon_area(K))

    def hit(rng, m):
        return int(np.count_nonzero(contains(K, sample_uniform(rng, d, m))))

    return mc.indicator_mean(hit, n, seed).scaled(omega(d + 1))


def U1(K, n: int = 100_000, seed: int = 0) -> Estimate:
    """U_1(K) = (1/2) P(x^perp meets K) for uniform x."""
    if isinstance(K, HPolytope) and K.is_whole_sphere:
        return Estimate.exact(0.5)
    if not isinstance(K, Cap):
        K = _as_vpolytope(K)
    d = K.dim

    def hit(rng, m):
        return int(np.count_nonzero(hits_great_subsphere(K, sample_uniform(rng, d, m))))

    return mc.indicator_mean(hit, n, seed).scaled(0.5)


def U1_perimeter(K) -> float:
    """Exact U_1 on S^2 from the Crofton formula U_1 = perimeter / (4 pi)."""
    if isinstance(K, Cap):
        return cap_U1(2, K.radius) if K.proper else 0.5
    if isinstance(K, HPolytope) and K.is_whole_sphere:
        return 0.5
    return polygon_perimeter(K) / (4 * math.pi)


def U1_exact_via_polar(K, n: int = 100_000, seed: int = 0, exact: bool = False) -> Estimate:
    """U_1(K) = 1/2 - sigma_d(K*) / omega_{d+1} for proper K."""
    if isinstance(K, HPolytope):
        K = _as_vpolytope(K)
    Kp = polar(K)
    d = K.dim
    v = volume(Kp, n, seed, exact=exact)
    w = omega(d + 1)
    return Estimate(0.5 - v.value / w, v.stderr / w, v.n, v.seed)


def _check_tilde_domain(K, e):
    if isinstance(K, Cap):
        dist = geodesic_distance(K.center, e)
        if dist > K.radius + 1e-12 or dist + K.radius > math.pi / 2 + 1e-12:
            raise ValueError("need e in K and K inside the closed hemisphere of e")
        return
    V = K.vertices
    if len(V) > 1:
        if isinstance(K, VPolytope) and K.dim == 2 and len(V) >= 3:
            H = to_hpolytope(K)
            if not contains(H, e):
                raise ValueError("centre e is not in K")
    if np.min(V @ e) < -1e-9:
        raise ValueError("K is not inside the closed hemisphere of e")


def U_tilde(K, e, n: int = 100_000, seed: int = 0, check: bool = True) -> Estimate:
    """sigma_d-measure of x whose bisector (x - e)^perp meets K."""
    e = np.asarray(e, dtype=float)
    if not isinstance(K, Cap):
        K = _as_vpolytope(K)
    if check:
        _check_tilde_domain(K, e)
    d = K.dim

    def hit(rng, m):
        x = sample_uniform(rng, d, m)
        y = x - e
        ny = np.linalg.norm(y, axis=1)
        ok = ny > 1e-15
        h = hits_great_subsphere(K, y[ok] / ny[ok, None])
        return int(np.count_nonzero(h))

    return mc.indicator_mean(hit, n, seed).scaled(omega(d + 1))


# --- radii ---------------------------------------------------------------------

def centred_inradius(P, e) -> float:
    """r_e(P) = max{r : B(e, r) in P}, capped at pi/2."""
    e = np.asarray(e, dtype=float)
    if isinstance(P, Cap):
        if not P.contains(e):
            raise ValueError("centre outside the body")
        return min(P.radius - geodesic_distance(P.center, e), math.pi / 2)
    if P.is_whole_sphere:
        return math.pi / 2
    ip = P.normals @ e
    if np.min(ip) < -1e-12:
        raise ValueError("centre outside the polytope")
    return float(np.min(np.arcsin(np.clip(ip, 0.0, 1.0))))


def centred_circumradius(K, e) -> float:
    """R_e(K) = min{r : K in B(e, r)}, via the extreme points."""
    e = np.asarray(e, dtype=float)
    if isinstance(K, Cap):
        return geodesic_distance(K.center, e) + K.radius
    K = _as_vpolytope(K)
    return float(np.max(geodesic_distance(K.vertices, e)))


def inradius_free(P):
    """Spherical Chebyshev centre: (max_e r_e(P), argmax).

    Maximises min_j <e, n_j> over unit e as a least-distance program
    (minimum-norm point of {x : N x >= 1}); r = arcsin(1 / |x|).
    """
    if isinstance(P, Cap):
        return min(P.radius, math.pi / 2), P.center.copy()
    if P.is_whole_sphere:
        return math.pi / 2, origin(P.dim).copy()
    res = max_min_direction(P.normals)
    if res is None:
        raise InfeasibleError("polytope has empty interior")
    e, s = res
    return float(math.asin(min(s, 1.0))), e


def maxinr_holds(P: HPolytope, e, tol: float = 1e-9) -> bool:
    """All vertices of P lie in the closed hemisphere of e."""
    V = vertices(P).vertices
    return bool(len(V) == 0 or np.min(V @ e) >= -tol)


def circumcenter(K):
    """Centre of the smallest cap containing K (minimax distance to the vertices)."""
    if isinstance(K, Cap):
        return K.center.copy(), K.radius
    K = _as_vpolytope(K)
    res = max_min_direction(K.vertices)
    if res is None:
        raise ImproperError("body is not contained in an open hemisphere")
    e, s = res
    return e, float(math.acos(min(s, 1.0)))


# --- L2 and L-infinity deviation from a cap -----------------------------------

@dataclass(frozen=True)
class DeviationOptions:
    """Controls for the Delta_2 / Delta_0 minimisation.

    ``quadrature`` is ``"sectors"`` (d = 2: Gauss-Legendre on every angular
    sector between vertex directions) or ``"grid"`` (uniform grid with
    ``grid`` nodes; Fibonacci/seeded directions when d >= 3).
    """

    grid: int = 512
    quadrature: str = "sectors"
    gauss_nodes: int = 24
    refine: bool = True
    xatol: float = 1e-9
    maxiter: int = 400


def _gnomonic_volume(V: np.ndarray, e: np.ndarray) -> float:
    """F_K(e): Lebesgue volume of the gnomonic image of conv(V) in the tangent plane at e."""
    ip = V @ e
    if np.min(ip) <= 0:
        return math.inf
    T = tangent_basis(e)
    if len(e) == 3:
        cyc = spherical_hull_cycle(V, e)
        p = (cyc @ T.T) / (cyc @ e)[:, None]
        x, y = p[:, 0], p[:, 1]
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
    return float(ConvexHull((V @ T.T) / ip[:, None]).volume)


def _chart(c: np.ndarray):
    T = tangent_basis(c)

    def to_sphere(v):
        p = c + np.asarray(v) @ T
        return p / np.linalg.norm(p)

    return to_sphere


class _Body:
    """Cached data for deviation evaluation of one proper polytope."""

    def __init__(self, P: HPolytope, opts: DeviationOptions):
        if P.is_whole_sphere:
            raise ImproperError("whole sphere has no cap deviation")
        rep = vertices(P, report=True)
        if not rep.line_free or len(rep.polytope) < P.dim + 1:
            raise ImproperError("polytope is not proper")
        self.P = P
        self.V = rep.polytope.vertices
        self.d = P.dim
        self.opts = opts

    def admissible(self, e) -> bool:
        return bool(np.min(self.P.normals @ e) > 0 and np.min(self.V @ e) > 0)

    def radial_samples(self, e):
        """(alpha values, quadrature weights summing to 1) over S_e."""
        o = self.opts
        if self.d == 2 and o.quadrature == "sectors":
            T = tangent_basis(e)
            c = self.V @ T.T
            ang = np.sort(np.mod(np.arctan2(c[:, 1], c[:, 0]), 2 * math.pi))
            bounds = np.append(ang, ang[0] + 2 * math.pi)
            xg, wg = np.polynomial.legendre.leggauss(o.gauss_nodes)
            lo, hi = bounds[:-1], bounds[1:]
            half = 0.5 * (hi - lo)
            phi = (0.5 * (hi + lo))[:, None] + half[:, None] * xg[None, :]
            w = (half[:, None] * wg[None, :]).ravel() / (2 * math.pi)
            phi = phi.ravel()
            u = np.cos(phi)[:, None] * T[0] + np.sin(phi)[:, None] * T[1]
        else:
            u = tangent_directions(e, o.grid)
            w = np.full(len(u), 1.0 / len(u))
        return radial_function(self.P, e, u, check=False), w

    def l2(self, e) -> float:
        if not self.admissible(e):
            return math.inf
        alpha, w = self.radial_samples(e)
        z = sine_integral_D(self.d, alpha)
        m = float(np.dot(w, z))
        return math.sqrt(max(float(np.dot(w, (z - m) ** 2)), 0.0))

    def linf(self, e) -> float:
        if not self.admissible(e):
            return math.inf
        R = float(np.max(geodesic_distance(self.V, e)))
        r = float(np.min(np.arcsin(np.clip(self.P.normals @ e, 0.0, 1.0))))
        return R - r

    def linf_grid(self, e) -> float:
        alpha, _ = self.radial_samples(e)
        return float(np.max(alpha) - np.min(alpha))

    def fk(self, e) -> float:
        return _gnomonic_volume(self.V, e)

    def descend(self, f, start):
        if not self.opts.refine:
            return start
        to_sphere = _chart(start)
        res = minimize(lambda v: f(to_sphere(v)), np.zeros(self.d), method="Nelder-Mead",
                       options={"xatol": self.opts.xatol, "fatol": 1e-14,
                                "maxiter": self.opts.maxiter * self.d,
                                "initial_simplex": _simplex(self.d, 0.05)})
        e = to_sphere(res.x)
        return e if f(e) <= f(start) else start

    def candidates(self):
        inc = max_min_direction(self.P.normals)[0]
        cc = max_min_direction(self.V)[0]
        starts = [inc, cc]
        starts.append(self.descend(self.fk, cc))
        out = list(starts)
        for s in starts:
            out.append(self.descend(self.l2, s))
            out.append(self.descend(self.linf, s))
        return [e for e in out if self.admissible(e)]


def _simplex(d: int, h: float) -> np.ndarray:
    return np.vstack([np.zeros(d), h * np.eye(d)])


def deviation_profile(P, opts: DeviationOptions = DeviationOptions()):
    """(Delta_2 upper estimate, Delta_0 upper estimate, best centres) over a shared candidate set."""
    if isinstance(P, Cap):
        return 0.0, 0.0, [P.center]
    if isinstance(P, VPolytope):
        P = to_hpolytope(P)
    body = _Body(P, opts)
    cands = body.candidates()
    if not cands:
        raise ImproperError("no admissible centre found")
    l2 = [body.l2(e) for e in cands]
    li = [body.linf(e) for e in cands]
    return min(l2), min(li), cands


def delta2(P, opts: DeviationOptions = DeviationOptions()) -> float:
    """Upper estimate of Delta_2: minimum L2 deviation of D o alpha from its mean over candidate centres."""
    return deviation_profile(P, opts)[0]


def delta0(P, opts: DeviationOptions = DeviationOptions()) -> float:
    """Upper estimate of Delta_0 = inf_e (max alpha - min alpha), evaluated exactly as R_e - r_e."""
    return deviation_profile(P, opts)[1]


def theta_r(P) -> float:
    """R_e - r_e at the spherical Chebyshev centre e."""
    if isinstance(P, Cap):
        return 0.0
    r, e = inradius_free(P)
    return centred_circumradius(P, e) - r


def theta_centred(P, e) -> float:
    """R_e(P) - r_e(P) for a fixed centre."""
    return centred_circumradius(P, e) - centred_inradius(P, e)


def canonical_deviation(phi_value: float, tau_value: float) -> float:
    """Phi(K) / tau - 1; negative values mean the size condition is violated."""
    if tau_value <= 0:
        raise ValueError("tau must be positive")
    return phi_value / tau_value - 1.0


class TauModel(str, Enum):
    VOLUME_U1 = "VolumeU1"
    INRADIUS_U1 = "InradiusU1"
    VORONOI_INRADIUS = "VoronoiInradius"


def tau(model, d: int, a: float) -> float:
    """Minimum of the hitting functional over bodies of size >= a (attained by caps)."""
    model = TauModel(model)
    if model is TauModel.VOLUME_U1:
        if not 0 < a < omega(d + 1):
            raise ValueError(f"volume level must lie in (0, {omega(d + 1)})")
        alpha_c = cap_radius_for_volume(d, a)
        if alpha_c >= math.pi / 2:
            return 1.0
        return 2 * cap_U1(d, alpha_c)
    if not 0 < a < math.pi / 2:
        raise ValueError("radius level must lie in (0, pi/2)")
    if model is TauModel.INRADIUS_U1:
        return 2 * cap_U1(d, a)
    return cap_volume(d, 2 * a) / omega(d + 1)
