"""Random models on S^d: Poisson points, the induced great-subsphere
tessellation, its Crofton and typical cells, and spherical Voronoi cells."""
from __future__ import annotations

import json
import math
import logging
from dataclasses import dataclass, field

import numpy as np

from .constants import schlafli_count
from .sphere_core import omega, origin, rotation_to, sample_uniform
from .spherical_convex import (HPolytope, _fmt, _hull_cycle, max_min_direction, polygon_area,
                               vertices)

log = logging.getLogger(__name__)

ORTHO_TOL = 1e-12


class DegenerateError(RuntimeError):
    """A realization is not in general position; the caller should resample."""


def _rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def sample_poisson(gamma_s: float, d: int, seed_or_rng=None) -> np.ndarray:
    """Isotropic Poisson process on S^d with intensity gamma_s (rows are points)."""
    if not gamma_s > 0:
        raise ValueError("intensity must be positive")
    rng = _rng(seed_or_rng)
    n = rng.poisson(gamma_s * omega(d + 1))
    return sample_uniform(rng, d, n)


def crofton_cell(points, o=None) -> HPolytope:
    """Cell of the tessellation by the great subspheres x^perp that contains ``o`` in its interior."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1 and points.size == 0:
        raise ValueError("pass an empty (0, d+1) array for no points")
    d = points.shape[1] - 1
    o = origin(d) if o is None else np.asarray(o, dtype=float)
    if len(points) == 0:
        return HPolytope.whole_sphere(d)
    ip = points @ o
    if np.min(np.abs(ip)) < ORTHO_TOL:
        raise DegenerateError("a great subsphere passes through the origin")
    return HPolytope(np.sign(ip)[:, None] * points, d, witness=o)


def crofton_area_s2(points) -> float:
    """Exact area of the Crofton cell at e_1 on S^2: 2 pi minus the perimeter of the polar.

    Skips building the H-polytope; used in the hot loops of the estimators.
    """
    points = np.asarray(points, dtype=float)
    if len(points) == 0:
        return 4 * math.pi
    x0 = points[:, 0]
    if np.min(np.abs(x0)) < ORTHO_TOL:
        raise DegenerateError("a great subsphere passes through the origin")
    n = points * np.sign(x0)[:, None]
    if len(n) == 1:
        return 2 * math.pi
    cyc = n[_hull_cycle(n[:, 1:] / n[:, :1])]
    ip = np.clip(np.einsum("ij,ij->i", cyc, np.roll(cyc, -1, axis=0)), -1.0, 1.0)
    return 2 * math.pi - float(np.arccos(ip).sum())


def sample_crofton_cell(gamma_s: float, d: int, rng: np.random.Generator,
                        max_tries: int = 100) -> HPolytope:
    for _ in range(max_tries):
        try:
            return crofton_cell(sample_poisson(gamma_s, d, rng))
        except DegenerateError:
            continue
    raise DegenerateError("degeneracy budget exceeded")


# --- full tessellation (d = 2) ---------------------------------------------------

@dataclass
class Tessellation:
    dim: int
    generators: np.ndarray
    cells: list = field(default_factory=list)
    kind: str = "Hyperplane"

    def __len__(self):
        return len(self.cells)

    def to_json(self) -> str:
        g = _fmt(self.generators) if len(self.generators) else "[]"
        cells = ", ".join(_fmt(c.normals) if len(c) else "[]" for c in self.cells)
        return (f'{{"dim": {self.dim}, "kind": {json.dumps(self.kind)}, '
                f'"generators": {g}, "cells": [{cells}]}}')


def _sign_witness(normals, signs, v, i, j):
    """Interior point of the cell with the given signs, near the vertex v of circles i, j."""
    M = normals[[i, j]]
    t = np.linalg.pinv(M) @ np.array([signs[i], signs[j]], dtype=float)
    others = np.delete(np.abs(normals @ v), [i, j])
    delta = 0.25 * (others.min() if len(others) else 1.0) / max(np.linalg.norm(t), 1.0)
    w = v + min(delta, 0.1) * t
    return w / np.linalg.norm(w)


def tessellation_cells(normals, d: int = 2, rng=None, random_seeds: int = 2000) -> Tessellation:
    """All cells of the arrangement of great circles with the given normals on S^2.

    Cells are identified by sign vectors.  Around every vertex v (pairwise
    intersection) the four adjacent cells have the signs of v on all other
    circles and all four sign choices on the two circles through v.  Random
    uniform seeds supplement the vertex seeds if the count differs from the
    Schlaefli number, which certifies completeness.
    """
    if d != 2:
        raise NotImplementedError("full enumeration is implemented for d = 2")
    N = np.asarray(normals, dtype=float).reshape(-1, 3)
    N = N / np.linalg.norm(N, axis=1, keepdims=True) if len(N) else N
    k = len(N)
    if k == 0:
        return Tessellation(d, N, [HPolytope.whole_sphere(d)])
    if k == 1:
        return Tessellation(d, N, [HPolytope(N, d, witness=N[0]), HPolytope(-N, d, witness=-N[0])])
    target = schlafli_count(d, k)
    ii, jj = np.triu_indices(k, 1)
    raw = np.cross(N[ii], N[jj])
    nr = np.linalg.norm(raw, axis=1)
    if np.min(nr) < 1e-12:
        raise DegenerateError("two coincident great circles")
    V = raw / nr[:, None]
    ip = V @ N.T
    ip[np.arange(len(V)), ii] = 1.0
    ip[np.arange(len(V)), jj] = 1.0
    if np.min(np.abs(ip)) < 1e-12:
        raise DegenerateError("three great circles through one point")
    cells: dict[bytes, np.ndarray] = {}
    for sgn in (1.0, -1.0):
        base = np.sign(sgn * ip).astype(np.int8)
        for si in (1, -1):
            for sj in (1, -1):
                s = base.copy()
                s[np.arange(len(V)), ii] = si
                s[np.arange(len(V)), jj] = sj
                for r in range(len(V)):
                    key = s[r].tobytes()
                    if key not in cells:
                        cells[key] = (s[r], sgn * V[r], ii[r], jj[r])
    out = []
    for s, v, i, j in cells.values():
        w = _sign_witness(N, s, v, i, j)
        oriented = s[:, None] * N
        if np.min(oriented @ w) <= 0:
            raise DegenerateError("could not place a witness inside a cell")
        out.append(HPolytope(oriented, d, witness=w))
    if len(out) != target:
        rng = _rng(rng)
        seen = {np.sign(N @ c.witness).astype(np.int8).tobytes() for c in out}
        X = sample_uniform(rng, d, random_seeds)
        for x in X:
            s = np.sign(N @ x).astype(np.int8)
            if s.tobytes() not in seen:
                seen.add(s.tobytes())
                out.append(HPolytope(s[:, None] * N, d, witness=x))
        if len(out) != target:
            raise DegenerateError(f"found {len(out)} cells, expected {target}")
    return Tessellation(d, N, out)


def sample_tessellation(gamma_s: float, d: int, rng: np.random.Generator,
                        max_tries: int = 100) -> tuple[Tessellation, int]:
    """Poisson hyperplane tessellation of S^2; returns it and the number of rejected draws."""
    rejected = 0
    for _ in range(max_tries):
        X = sample_poisson(gamma_s, d, rng)
        try:
            return tessellation_cells(X, d, rng), rejected
        except DegenerateError:
            rejected += 1
            log.info("rejected a degenerate arrangement (%d so far)", rejected)
    raise DegenerateError("degeneracy budget exceeded")


def cell_centre(P: HPolytope) -> np.ndarray:
    """Circumcentre of a proper cell; the Chebyshev centre for cells that are not line-free."""
    if not P.is_whole_sphere:
        rep = vertices(P, report=True)
        if rep.line_free and len(rep.polytope):
            res = max_min_direction(rep.polytope.vertices)
            if res is not None:
                return res[0]
        res = max_min_direction(P.normals)
        if res is not None:
            return res[0]
    return origin(P.dim)


def typical_cell(tess: Tessellation, rng: np.random.Generator) -> HPolytope:
    """A uniformly chosen cell, rotated by a draw of kappa(centre, .)^{-1} so its centre is the origin."""
    if len(tess) == 0:
        raise ValueError("empty tessellation")
    P = tess.cells[int(rng.integers(len(tess)))]
    c = cell_centre(P)
    R = rotation_to(c, rng)
    return P.rotated(R.T)


# --- Voronoi ---------------------------------------------------------------------------

def voronoi_cell(x, A) -> HPolytope:
    """C(x, A) = {y : d(y, x) <= d(y, z) for all z in A}; bisector normals x - z."""
    x = np.asarray(x, dtype=float)
    A = np.asarray(A, dtype=float).reshape(-1, x.size)
    diff = x[None, :] - A
    keep = np.linalg.norm(diff, axis=1) > 1e-15
    diff = diff[keep]
    if len(diff) == 0:
        return HPolytope.whole_sphere(x.size - 1)
    return HPolytope(diff, x.size - 1, witness=x)


def bisector_crofton_cell(points, o=None) -> HPolytope:
    """Crofton cell at ``o`` of the bisector subspheres (x - o)^perp, x in points."""
    points = np.asarray(points, dtype=float)
    d = points.shape[1] - 1
    o = origin(d) if o is None else np.asarray(o, dtype=float)
    n = points - o[None, :]
    keep = np.linalg.norm(n, axis=1) > 1e-15
    n = n[keep]
    if len(n) == 0:
        return HPolytope.whole_sphere(d)
    n = n / np.linalg.norm(n, axis=1, keepdims=True)
    return crofton_cell(n, o)


def voronoi_typical_cell(gamma_s: float, d: int, seed_or_rng=None, both: bool = False):
    """Typical Poisson-Voronoi cell C(o, X + delta_o).

    With ``both=True`` also returns the bisector-process Crofton cell built
    from the same realization.
    """
    X = sample_poisson(gamma_s, d, seed_or_rng)
    o = origin(d)
    cell = voronoi_cell(o, np.vstack([o[None, :], X]))
    if both:
        return cell, bisector_crofton_cell(X, o)
    return cell


def voronoi_tessellation(points, d: int | None = None) -> Tessellation:
    points = np.asarray(points, dtype=float)
    if len(points) < 1:
        raise ValueError("need at least one nucleus")
    d = points.shape[1] - 1 if d is None else d
    return Tessellation(d, points, [voronoi_cell(x, points) for x in points], kind="Voronoi")


def same_normal_set(P: HPolytope, Q: HPolytope, tol: float = 1e-10) -> bool:
    """Normal sets agree up to ordering within tol."""
    if len(P) != len(Q):
        return False
    if len(P) == 0:
        return True
    a = P.normals[np.lexsort(P.normals.T[::-1])]
    b = Q.normals[np.lexsort(Q.normals.T[::-1])]
    return bool(np.max(np.abs(a - b)) <= tol)


def partition_volume(tess: Tessellation) -> float:
    """Sum of the exact cell areas (d = 2)."""
    return float(sum(polygon_area(c) for c in tess.cells))
