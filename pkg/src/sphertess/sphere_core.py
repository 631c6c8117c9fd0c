"""Primitives on the unit sphere S^d embedded in R^{d+1}.

Points (and normals of great subspheres) are plain numpy arrays of unit
norm; :func:`unit` builds and checks them.  The spherical origin is the
first standard basis vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.stats import special_ortho_group

NORM_TOL = 1e-12


def unit(coords) -> np.ndarray:
    """Return ``coords`` renormalised to unit length as a read-only array."""
    v = np.array(coords, dtype=float)
    if v.ndim != 1:
        raise ValueError("a point on the sphere is a 1-d coordinate vector")
    if v.size < 3:
        raise ValueError(f"need d >= 2 (at least 3 coordinates), got {v.size}")
    nrm = np.linalg.norm(v)
    if not np.isfinite(nrm) or nrm == 0.0:
        raise ValueError("cannot normalise a zero or non-finite vector")
    v /= nrm
    v.flags.writeable = False
    return v


def origin(d: int) -> np.ndarray:
    """The spherical origin of S^d (first standard basis vector)."""
    e = np.zeros(d + 1)
    e[0] = 1.0
    e.flags.writeable = False
    return e


def basis(d: int, i: int) -> np.ndarray:
    e = np.zeros(d + 1)
    e[i] = 1.0
    e.flags.writeable = False
    return e


@dataclass(frozen=True)
class Cap:
    """Closed geodesic ball B(center, radius)."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", unit(self.center))
        if not 0.0 <= self.radius <= math.pi:
            raise ValueError(f"cap radius must lie in [0, pi], got {self.radius}")

    @property
    def dim(self) -> int:
        return self.center.size - 1

    @property
    def proper(self) -> bool:
        return self.radius <= math.pi / 2

    def contains(self, y) -> bool:
        return float(np.dot(self.center, y)) >= math.cos(self.radius) - NORM_TOL


def _check_same_dim(x, y):
    if np.shape(x)[-1] != np.shape(y)[-1]:
        raise ValueError(f"dimension mismatch: {np.shape(x)[-1]} vs {np.shape(y)[-1]}")


def geodesic_distance(x, y):
    """Great-circle distance in radians; works row-wise on stacked points."""
    _check_same_dim(x, y)
    ip = np.sum(np.asarray(x) * np.asarray(y), axis=-1)
    out = np.arccos(np.clip(ip, -1.0, 1.0))
    return float(out) if np.ndim(out) == 0 else out


def omega(n: int) -> float:
    """Surface area of the unit sphere S^{n-1} in R^n."""
    if n < 1:
        raise ValueError("omega(n) needs n >= 1")
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def _D_quad(d: int, x: float) -> float:
    val, _ = integrate.quad(lambda t: math.sin(t) ** (d - 1), 0.0, x,
                            epsabs=1e-13, epsrel=1e-13, limit=200)
    return val


def sine_integral_D(d: int, x):
    """D_d(x) = int_0^x sin^{d-1}(t) dt for x in [0, pi].

    Closed forms for d = 2, 3; adaptive quadrature otherwise.  Accepts
    scalars or arrays.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < -1e-15) or np.any(xa > math.pi + 1e-15):
        raise ValueError("x must lie in [0, pi]")
    xa = np.clip(xa, 0.0, math.pi)
    if d == 2:
        out = 1.0 - np.cos(xa)
    elif d == 3:
        out = 0.5 * (xa - np.sin(xa) * np.cos(xa))
    else:
        out = np.vectorize(lambda t: _D_quad(d, t), otypes=[float])(xa)
    return float(out) if out.ndim == 0 else out


def cap_volume(d: int, r):
    """sigma_d(B(e, r)) = omega_d * D_d(r)."""
    ra = np.asarray(r, dtype=float)
    if np.any(ra < 0) or np.any(ra > math.pi + 1e-15):
        raise ValueError("cap radius must lie in [0, pi]")
    return omega(d) * sine_integral_D(d, r)


def cap_U1(d: int, a):
    """U_1 of a cap of radius a <= pi/2: (omega_d/omega_{d+1}) int_0^a cos^{d-1}."""
    aa = np.asarray(a, dtype=float)
    if np.any(aa < 0) or np.any(aa > math.pi / 2 + 1e-15):
        raise ValueError("cap_U1 needs a in [0, pi/2]")
    aa = np.clip(aa, 0.0, math.pi / 2)
    half = sine_integral_D(d, math.pi / 2)
    # int_0^a cos^{d-1} = D(pi/2) - D(pi/2 - a)
    val = (omega(d) / omega(d + 1)) * (half - np.asarray(sine_integral_D(d, math.pi / 2 - aa)))
    return float(val) if np.ndim(val) == 0 else val


def cap_radius_for_volume(d: int, vol: float, tol: float = 1e-12) -> float:
    """Inverse of :func:`cap_volume` by monotone bisection."""
    full = omega(d + 1)
    if not 0.0 <= vol <= full:
        raise ValueError(f"volume must lie in [0, {full}]")
    lo, hi = 0.0, math.pi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if cap_volume(d, mid) < vol:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sample_uniform(rng: np.random.Generator, d: int, size: int | None = None) -> np.ndarray:
    """Uniform point(s) on S^d via normalised Gaussians."""
    shape = (d + 1,) if size is None else (size, d + 1)
    g = rng.standard_normal(shape)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def transporter(x) -> np.ndarray:
    """Deterministic rotation (det 1) taking the origin to ``x``.

    Product of the reflection across the last coordinate hyperplane (which
    fixes the origin) and the Householder reflection swapping origin and x.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    o = np.zeros(n)
    o[0] = 1.0
    flip = np.eye(n)
    flip[-1, -1] = -1.0
    w = o - x
    nw = np.linalg.norm(w)
    if nw < 1e-15:
        return np.eye(n)
    w /= nw
    house = np.eye(n) - 2.0 * np.outer(w, w)
    return house @ flip


def random_stabilizer(rng: np.random.Generator, d: int) -> np.ndarray:
    """Haar-random rotation of R^{d+1} fixing the origin."""
    q = np.eye(d + 1)
    q[1:, 1:] = special_ortho_group.rvs(d, random_state=rng)
    return q


def rotation_to(x, rng: np.random.Generator) -> np.ndarray:
    """Random rotation R with R @ origin = x, distributed as the kernel kappa(x, .)."""
    x = np.asarray(x, dtype=float)
    return transporter(x) @ random_stabilizer(rng, x.size - 1)


def random_rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    return special_ortho_group.rvs(d + 1, random_state=rng)


def tangent_basis(e) -> np.ndarray:
    """Orthonormal basis (rows) of the tangent space e^perp."""
    e = np.asarray(e, dtype=float)
    # columns 1.. of the transporter image of the standard frame span e^perp
    t = transporter(e)
    return t[:, 1:].T

