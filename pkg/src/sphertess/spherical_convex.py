"""Spherical polytopes in H- and V-representation.

An :class:`HPolytope` is ``{y in S^d : <y, n_j> >= 0 for all j}``; an
empty normal list is the whole sphere.  A :class:`VPolytope` is the
spherical convex hull of finitely many unit vectors (the extreme rays of
a polyhedral cone).
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import lsq_linear

from .sphere_core import Cap, geodesic_distance, tangent_basis

MEMBER_TOL = 1e-12
DEGEN_TOL = 1e-9


class InfeasibleError(ValueError):
    """The body has empty interior (or is empty)."""


class ImproperError(ValueError):
    """The body is not contained in an open hemisphere."""


def _rows(a, dim=None) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        if dim is None:
            raise ValueError("dimension needed for an empty list")
        return np.zeros((0, dim + 1))
    a = np.atleast_2d(a)
    return a / np.linalg.norm(a, axis=1, keepdims=True)


def nnls(A: np.ndarray, b: np.ndarray):
    """argmin ||A x - b|| over x >= 0 and the residual norm.

    Bounded-variable least squares; scipy 1.15's ``optimize.nnls`` can return
    non-optimal points with a zero reported residual, so it is not used.
    """
    x = lsq_linear(A, b, bounds=(0.0, np.inf), method="bvls", tol=1e-14).x
    x = np.maximum(x, 0.0)
    return x, float(np.linalg.norm(A @ x - b))


def least_distance(G: np.ndarray, h: np.ndarray):
    """Minimum-norm x with G x >= h (Lawson-Hanson LDP via NNLS), or None if infeasible."""
    m, n = G.shape
    E = np.vstack([G.T, h[None, :]])
    f = np.zeros(n + 1)
    f[-1] = 1.0
    u, _ = nnls(E, f)
    r = E @ u - f
    if abs(r[-1]) < 1e-14:
        return None
    return -r[:n] / r[-1]


def max_min_direction(G: np.ndarray):
    """Unit e maximising min_j <e, g_j>, assuming the optimum is positive.

    Returns ``(e, s)`` with ``s = min_j <e, g_j>``, or ``None`` when no
    direction has all inner products positive.
    """
    x = least_distance(G, np.ones(len(G)))
    if x is None or not np.all(np.isfinite(x)):
        return None
    nx = np.linalg.norm(x)
    if nx == 0:
        return None
    e = x / nx
    s = float(np.min(G @ e))
    if s <= 0:
        return None
    # polish on the active set: stationary points are e ~ pinv(G_A) 1
    act = G @ e - s < 1e-7
    cand = np.linalg.pinv(G[act]) @ np.ones(int(act.sum()))
    nc = np.linalg.norm(cand)
    if nc > 0:
        cand /= nc
        sc = float(np.min(G @ cand))
        if sc > s:
            e, s = cand, sc
    return e, s


class HPolytope:
    """Spherical polytope as an intersection of closed hemispheres."""

    __slots__ = ("dim", "normals", "witness")

    def __init__(self, normals, dim: int | None = None, witness=None):
        if dim is None:
            dim = np.atleast_2d(np.asarray(normals)).shape[1] - 1
        self.dim = int(dim)
        self.normals = _rows(normals, self.dim)
        self.normals.flags.writeable = False
        if self.normals.shape[1] != self.dim + 1:
            raise ValueError("normals do not match the dimension")
        if witness is not None:
            witness = np.asarray(witness, dtype=float)
            witness = witness / np.linalg.norm(witness)
            if len(self.normals) and np.min(self.normals @ witness) <= 0:
                raise ValueError("witness is not strictly interior")
        self.witness = witness

    @classmethod
    def whole_sphere(cls, d: int) -> "HPolytope":
        return cls(np.zeros((0, d + 1)), d)

    @property
    def is_whole_sphere(self) -> bool:
        return len(self.normals) == 0

    def __len__(self):
        return len(self.normals)

    def __repr__(self):
        return f"HPolytope(dim={self.dim}, m={len(self.normals)})"

    def rotated(self, R) -> "HPolytope":
        R = np.asarray(R)
        w = None if self.witness is None else R @ self.witness
        return HPolytope(self.normals @ R.T, self.dim, w)

    def interior_point(self) -> np.ndarray:
        if self.witness is not None:
            return self.witness
        if self.is_whole_sphere:
            e = np.zeros(self.dim + 1)
            e[0] = 1.0
            return e
        res = max_min_direction(self.normals)
        if res is None:
            raise InfeasibleError("polytope has empty interior")
        return res[0]


class VPolytope:
    """Spherical convex hull of unit vectors; stores only the extreme ones."""

    __slots__ = ("dim", "vertices")

    def __init__(self, points, dim: int | None = None, prune: bool = True):
        if dim is None:
            dim = np.atleast_2d(np.asarray(points)).shape[1] - 1
        self.dim = int(dim)
        pts = _rows(points, self.dim)
        pts = _dedupe(pts)
        if prune and len(pts) > 1 and self.dim <= 3:
            pts = pts[_extreme_mask(pts)]
        self.vertices = pts
        self.vertices.flags.writeable = False

    def __len__(self):
        return len(self.vertices)

    def __repr__(self):
        return f"VPolytope(dim={self.dim}, f0={len(self.vertices)})"

    def rotated(self, R) -> "VPolytope":
        return VPolytope(self.vertices @ np.asarray(R).T, self.dim, prune=False)

    @property
    def proper(self) -> bool:
        """Contained in an open hemisphere (the cone is line-free)."""
        if len(self.vertices) == 0:
            return False
        return max_min_direction(self.vertices) is not None


def _dedupe(pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    keep = []
    for i, p in enumerate(pts):
        if all(np.linalg.norm(p - pts[j]) > tol for j in keep):
            keep.append(i)
    return pts[keep]


def _extreme_mask(pts: np.ndarray) -> np.ndarray:
    """True for points that are not non-negative combinations of the others."""
    m = len(pts)
    mask = np.ones(m, dtype=bool)
    for i in range(m):
        others = pts[mask & (np.arange(m) != i)]
        if len(others) == 0:
            continue
        _, res = nnls(others.T, pts[i])
        if res < 1e-10:
            mask[i] = False
    return mask


# --- membership and vertices ----------------------------------------------

def contains(P: HPolytope, y) -> bool | np.ndarray:
    """Membership test; ``y`` may be one point or a stack of points."""
    y = np.asarray(y, dtype=float)
    if P.is_whole_sphere:
        return True if y.ndim == 1 else np.ones(len(y), dtype=bool)
    ip = y @ P.normals.T
    return bool(np.all(ip >= -MEMBER_TOL)) if y.ndim == 1 else np.all(ip >= -MEMBER_TOL, axis=1)


@dataclass
class VertexReport:
    polytope: VPolytope
    skipped: int
    line_free: bool


def vertices(P: HPolytope, report: bool = False):
    """Extreme unit vectors of the cone of ``P`` by d-subset scan.

    Each d-subset of normals spans a hyperplane arrangement whose
    one-dimensional null space gives a candidate ray; a candidate is kept
    (in whichever orientation satisfies every other constraint).  Subsets
    that are rank deficient or whose residuals are marginally negative are
    skipped and counted.  A body with a ray and its negative is flagged
    as not line-free.
    """
    d = P.dim
    N = P.normals
    m = len(N)
    if m >= 1:
        w = P.interior_point()
        if np.min(N @ w) <= 0:
            raise InfeasibleError("polytope has empty interior")
    cands, skipped = [], 0
    if m >= d:
        if d == 2 and m >= 2:
            ii, jj = np.triu_indices(m, 1)
            raw = np.cross(N[ii], N[jj])
            nr = np.linalg.norm(raw, axis=1)
            good = nr > 1e-12
            skipped += int((~good).sum())
            rays = raw[good] / nr[good, None]
            subsets = np.stack([ii[good], jj[good]], axis=1)
        else:
            rays, sub = [], []
            for idx in itertools.combinations(range(m), d):
                A = N[list(idx)]
                _, sv, vt = np.linalg.svd(A)
                if sv[-1] < 1e-12 * max(sv[0], 1.0):
                    skipped += 1
                    continue
                rays.append(vt[-1])
                sub.append(idx)
            rays = np.array(rays).reshape(-1, d + 1)
            subsets = np.array(sub, dtype=int).reshape(-1, d)
        res = rays @ N.T
        own = np.zeros_like(res, dtype=bool)
        rows = np.arange(len(rays))[:, None]
        own[rows, subsets] = True
        for sign in (1.0, -1.0):
            r = np.where(own, np.inf, sign * res)
            rmin = r.min(axis=1) if m > d else np.full(len(rays), np.inf)
            ok = rmin >= 0
            marginal = (rmin < 0) & (rmin > -DEGEN_TOL)
            skipped += int(marginal.sum())
            cands.extend(sign * rays[ok])
    pts = np.array(cands).reshape(-1, d + 1)
    pts = _dedupe(pts, 1e-9) if len(pts) else pts
    line_free = not any(np.linalg.norm(p + q) < 1e-9 for p in pts for q in pts)
    line_free = line_free and len(pts) > 0
    V = VPolytope(pts, d, prune=False)
    if report:
        return VertexReport(V, skipped, line_free)
    return V


# --- duality ---------------------------------------------------------------

def polar(K):
    """Polar body {u : <u, x> <= 0 for all x in K}.

    V-rep maps to H-rep with normals -v_i; H-rep maps to the V-rep with
    vertices among -n_j; a cap of radius a maps to the antipodal cap of
    radius pi/2 - a.
    """
    if isinstance(K, Cap):
        if not K.proper:
            raise ImproperError("polar of a cap needs radius <= pi/2")
        return Cap(-K.center, math.pi / 2 - K.radius)
    if isinstance(K, VPolytope):
        if not K.proper:
            raise ImproperError("body is not contained in an open hemisphere")
        return HPolytope(-K.vertices, K.dim)
    if isinstance(K, HPolytope):
        if K.is_whole_sphere:
            raise ImproperError("the whole sphere has an empty polar")
        V = VPolytope(-K.normals, K.dim)
        if not V.proper:
            raise ImproperError("polar has empty interior")
        return V
    raise TypeError(f"unsupported body {type(K).__name__}")


# --- hitting ----------------------------------------------------------------

def hits_great_subsphere(K, x) -> bool | np.ndarray:
    """Does the great subsphere x^perp meet K?  ``x`` may be stacked."""
    x = np.asarray(x, dtype=float)
    if isinstance(K, Cap):
        ip = np.abs(x @ K.center)
        out = ip <= math.sin(min(K.radius, math.pi / 2)) + MEMBER_TOL
        if K.radius >= math.pi / 2:
            out = np.ones_like(ip, dtype=bool)
        return bool(out) if x.ndim == 1 else out
    V = K.vertices if isinstance(K, VPolytope) else np.atleast_2d(np.asarray(K, dtype=float))
    ip = x @ V.T
    out = (ip.min(axis=-1) <= MEMBER_TOL) & (ip.max(axis=-1) >= -MEMBER_TOL)
    return bool(out) if x.ndim == 1 else out


# --- radial function ----------------------------------------------------------

def radial_function(P, e, u, check: bool = True):
    """Spherical radial function alpha_{P,e}(u), u a unit tangent vector at e.

    Closed form per constraint: along cos(t) e + sin(t) u the constraint
    a cos t + b sin t >= 0 (a = <e,n>, b = <u,n>) binds at
    t = arctan2(a, -b) when b < 0.
    """
    e = np.asarray(e, dtype=float)
    u = np.asarray(u, dtype=float)
    if isinstance(P, Cap):
        val = np.full(u.shape[:-1], P.radius)
        return float(val) if u.ndim == 1 else val
    if P.is_whole_sphere:
        raise ImproperError("whole sphere is not contained in a hemisphere")
    a = P.normals @ e
    if np.min(a) <= 0:
        raise ValueError("centre is not interior to the polytope")
    if check and P.dim <= 3:
        V = vertices(P)
        if len(V) == 0 or np.min(V.vertices @ e) < -1e-9:
            raise ImproperError("polytope not contained in the closed hemisphere of the centre")
    b = u @ P.normals.T
    t = np.where(b < 0, np.arctan2(a, -np.minimum(b, -1e-300)), math.pi / 2)
    val = np.minimum(t.min(axis=-1), math.pi / 2)
    return float(val) if u.ndim == 1 else val


def tangent_directions(e, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """Directions on the unit sphere S_e of the tangent space at e.

    For d = 2 a uniform angular grid of n nodes; for d = 3 a Fibonacci
    lattice; otherwise n seeded uniform draws.
    """
    e = np.asarray(e, dtype=float)
    T = tangent_basis(e)
    k = T.shape[0]
    if k == 2:
        phi = 2 * math.pi * np.arange(n) / n
        c = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    elif k == 3:
        i = np.arange(n) + 0.5
        z = 1 - 2 * i / n
        r = np.sqrt(1 - z * z)
        th = math.pi * (1 + 5 ** 0.5) * i
        c = np.stack([r * np.cos(th), r * np.sin(th), z], axis=1)
    else:
        rng = rng or np.random.default_rng(0)
        g = rng.standard_normal((n, k))
        c = g / np.linalg.norm(g, axis=1, keepdims=True)
    return c @ T


# --- d = 2 exact measures -----------------------------------------------------

def _hull_cycle(p: np.ndarray) -> list[int]:
    """Indices of the planar convex hull in counter-clockwise order (monotone chain)."""
    pts = sorted(range(len(p)), key=lambda i: (p[i, 0], p[i, 1]))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return ((p[a, 0] - p[o, 0]) * (p[b, 1] - p[o, 1])
                - (p[a, 1] - p[o, 1]) * (p[b, 0] - p[o, 0]))

    lower, upper = [], []
    for i in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], i) <= 0:
            lower.pop()
        lower.append(i)
    for i in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], i) <= 0:
            upper.pop()
        upper.append(i)
    return lower[:-1] + upper[:-1]


def spherical_hull_cycle(points: np.ndarray, center) -> np.ndarray:
    """Cyclically ordered extreme points of points lying in the open hemisphere of ``center`` (d = 2)."""
    T = tangent_basis(center)
    ip = points @ np.asarray(center)
    if np.min(ip) <= 0:
        raise ImproperError("points are not in the open hemisphere of the centre")
    proj = (points @ T.T) / ip[:, None]
    return points[_hull_cycle(proj)]


def _closed_path_length(cyc: np.ndarray) -> float:
    if len(cyc) < 2:
        return 0.0
    nxt = np.roll(cyc, -1, axis=0)
    return float(np.sum(geodesic_distance(cyc, nxt)))


def polygon_area(P) -> float:
    """Exact area of a convex spherical polygon on S^2.

    Uses area(K) = 2 pi - perimeter(K*), with the polar's boundary read off
    the hull of the normals in a gnomonic chart.
    """
    if isinstance(P, Cap):
        return 2 * math.pi * (1 - math.cos(P.radius))
    if isinstance(P, VPolytope):
        P = _vpoly_to_h(P)
    if P.dim != 2:
        raise ValueError("exact polygon area is implemented for d = 2")
    if P.is_whole_sphere:
        return 4 * math.pi
    cyc = spherical_hull_cycle(P.normals, P.interior_point())
    return 2 * math.pi - _closed_path_length(cyc)


def polygon_perimeter(P) -> float:
    """Exact perimeter of a convex spherical polygon on S^2 (2 pi for lunes)."""
    if isinstance(P, Cap):
        return 2 * math.pi * math.sin(P.radius)
    if isinstance(P, HPolytope):
        if P.dim != 2:
            raise ValueError("exact perimeter is implemented for d = 2")
        if P.is_whole_sphere:
            return 0.0
        rep = vertices(P, report=True)
        if not rep.line_free:
            return 2 * math.pi
        P = rep.polytope
    if P.dim != 2:
        raise ValueError("exact perimeter is implemented for d = 2")
    res = max_min_direction(P.vertices)
    if res is None:
        raise ImproperError("polygon is not proper")
    return _closed_path_length(spherical_hull_cycle(P.vertices, res[0]))


def _vpoly_to_h(V: VPolytope) -> HPolytope:
    """H-representation of a proper spherical polygon from its vertices (d = 2)."""
    res = max_min_direction(V.vertices)
    if res is None:
        raise ImproperError("polygon is not proper")
    c = res[0]
    cyc = spherical_hull_cycle(V.vertices, c)
    if len(cyc) < 3:
        raise InfeasibleError("polygon has empty interior")
    nrm = np.cross(cyc, np.roll(cyc, -1, axis=0))
    nrm *= np.sign(nrm @ c)[:, None]
    return HPolytope(nrm, 2, witness=c)


def to_hpolytope(V: VPolytope) -> HPolytope:
    """Facet description of a proper V-polytope (d = 2 by edges, d = 3 via its polar's vertices)."""
    if V.dim == 2:
        return _vpoly_to_h(V)
    if not V.proper:
        raise ImproperError("body is not contained in an open hemisphere")
    return HPolytope(-vertices(HPolytope(-V.vertices, V.dim)).vertices, V.dim)


# --- caps as polytopes -----------------------------------------------------

def _ring(e, n: int) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    return tangent_directions(e, n)


def cap_hpolytope(e, a: float, m: int) -> HPolytope:
    """Circumscribed polytope of B(e, a): m tangent great subspheres, inradius exactly a."""
    e = np.asarray(e, dtype=float)
    w = _ring(e, m)
    return HPolytope(math.sin(a) * e + math.cos(a) * w, len(e) - 1, witness=e)


def cap_vpolytope(e, a: float, m: int) -> VPolytope:
    """Inscribed polytope of B(e, a): m vertices on the boundary circle, circumradius exactly a."""
    e = np.asarray(e, dtype=float)
    w = _ring(e, m)
    return VPolytope(math.cos(a) * e + math.sin(a) * w, len(e) - 1)


# --- Hausdorff distance and simplification ---------------------------------

def distance_to_body(x, V: VPolytope) -> float:
    """Geodesic distance from x to the spherical convex hull of V's vertices."""
    x = np.asarray(x, dtype=float)
    lam, _ = nnls(V.vertices.T, x)
    p = V.vertices.T @ lam
    npn = np.linalg.norm(p)
    if npn < 1e-14:
        # x lies in the polar cone; nearest point is at distance >= pi/2
        return float(np.arccos(np.clip(np.max(V.vertices @ x), -1, 1)))
    p = p / npn
    c = float(x @ p)
    return float(math.atan2(np.linalg.norm(x - c * p), c))


def boundary_samples(V: VPolytope, per_edge: int):
    """Vertices plus evenly spaced points on every edge (d = 2); vertices only otherwise.

    Returns the samples and the mesh size (largest gap along the boundary).
    """
    if V.dim != 2 or len(V) < 2:
        return V.vertices.copy(), 0.0
    res = max_min_direction(V.vertices)
    if res is None:
        return V.vertices.copy(), 0.0
    cyc = spherical_hull_cycle(V.vertices, res[0])
    nxt = np.roll(cyc, -1, axis=0)
    out, mesh = [], 0.0
    for p, q in zip(cyc, nxt):
        theta = geodesic_distance(p, q)
        mesh = max(mesh, theta / per_edge)
        if theta < 1e-15:
            out.append(p)
            continue
        w = q - math.cos(theta) * p
        w /= np.linalg.norm(w)
        ts = theta * np.arange(per_edge) / per_edge
        out.extend(np.cos(ts)[:, None] * p + np.sin(ts)[:, None] * w)
    return np.array(out), mesh


@dataclass(frozen=True)
class HausdorffResult:
    value: float
    mesh: float


def hausdorff_distance(K: VPolytope, Q: VPolytope, n_samples: int = 16) -> HausdorffResult:
    """Sampled two-sided spherical Hausdorff distance; n_samples points per edge."""
    sk, mk = boundary_samples(K, n_samples)
    sq, mq = boundary_samples(Q, n_samples)
    d1 = max(distance_to_body(x, Q) for x in sk)
    d2 = max(distance_to_body(x, K) for x in sq)
    return HausdorffResult(max(d1, d2), max(mk, mq))


def simplify_vertices(P: VPolytope, k: int) -> VPolytope:
    """At most k vertices of P chosen by greedy farthest-point insertion; the hull lies inside P."""
    d = P.dim
    if k < d + 1:
        raise ValueError(f"k must be at least d + 1 = {d + 1}")
    V = P.vertices
    if len(V) <= k:
        return P
    chosen = [0]
    mind = geodesic_distance(V, V[0])
    while len(chosen) < d + 1:
        i = int(np.argmax(mind))
        chosen.append(i)
        mind = np.minimum(mind, geodesic_distance(V, V[i]))
    while len(chosen) < k:
        Q = VPolytope(V[chosen], d, prune=False)
        dist = np.array([0.0 if i in chosen else distance_to_body(V[i], Q) for i in range(len(V))])
        i = int(np.argmax(dist))
        if dist[i] <= 0:
            break
        chosen.append(i)
    return VPolytope(V[sorted(chosen)], d)


# --- serialisation -----------------------------------------------------------

def _fmt(a) -> str:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        return "[" + ", ".join(format(float(x), ".17g") for x in a) + "]"
    return "[" + ", ".join(_fmt(r) for r in a) + "]"


def polytope_to_json(P) -> str:
    """{"dim", "normals", "vertices"} with 17 significant digits."""
    if isinstance(P, HPolytope):
        normals = P.normals
        try:
            verts = vertices(P).vertices if P.dim <= 3 and not P.is_whole_sphere else np.zeros((0, P.dim + 1))
        except (InfeasibleError, ImproperError):
            verts = np.zeros((0, P.dim + 1))
    else:
        verts = P.vertices
        normals = np.zeros((0, P.dim + 1))
    nl = _fmt(normals) if len(normals) else "[]"
    vl = _fmt(verts) if len(verts) else "[]"
    return f'{{"dim": {P.dim}, "normals": {nl}, "vertices": {vl}}}'


def polytope_from_json(s: str, kind: str = "h"):
    obj = json.loads(s)
    d = int(obj["dim"])
    if kind == "h":
        return HPolytope(np.array(obj["normals"], dtype=float).reshape(-1, d + 1), d)
    return VPolytope(np.array(obj["vertices"], dtype=float).reshape(-1, d + 1), d, prune=False)
