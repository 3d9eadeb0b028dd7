"""Flat tori: lattices, Voronoi cells and closest-vector queries (d <= 3)."""

from __future__ import annotations

import itertools

import numpy as np

from .streams import uniforms

TIE_TOL = 1e-12


class LatticeError(ValueError):
    pass


def lll_reduce(basis: np.ndarray, delta: float = 0.75) -> np.ndarray:
    """LLL-reduce the columns of ``basis``; returns the unimodular transform U.

    The reduced basis is ``basis @ U``. Plain textbook version, fine for d <= 3.
    """
    b = np.array(basis, dtype=float)
    d = b.shape[1]
    U = np.eye(d, dtype=np.int64)

    def gso(b):
        bstar = np.zeros_like(b)
        mu = np.zeros((d, d))
        for i in range(d):
            bstar[:, i] = b[:, i]
            for j in range(i):
                mu[i, j] = b[:, i] @ bstar[:, j] / (bstar[:, j] @ bstar[:, j])
                bstar[:, i] -= mu[i, j] * bstar[:, j]
        return bstar, mu

    k = 1
    bstar, mu = gso(b)
    while k < d:
        for j in range(k - 1, -1, -1):
            q = round(mu[k, j])
            if q:
                b[:, k] -= q * b[:, j]
                U[:, k] -= q * U[:, j]
                bstar, mu = gso(b)
        lhs = bstar[:, k] @ bstar[:, k]
        rhs = (delta - mu[k, k - 1] ** 2) * (bstar[:, k - 1] @ bstar[:, k - 1])
        if lhs >= rhs:
            k += 1
        else:
            b[:, [k - 1, k]] = b[:, [k, k - 1]]
            U[:, [k - 1, k]] = U[:, [k, k - 1]]
            bstar, mu = gso(b)
            k = max(k - 1, 1)
    return U


class Lattice:
    """Lattice spanned by the columns of ``basis``.

    Precomputes an LLL-reduced basis and the Voronoi-relevant vectors, which
    fully describe the Voronoi cell of the origin.
    """

    def __init__(self, basis):
        basis = np.atleast_2d(np.array(basis, dtype=float))
        if basis.shape[0] != basis.shape[1] or basis.shape[0] not in (1, 2, 3):
            raise LatticeError("basis must be a d x d matrix with d in {1, 2, 3}")
        if not np.all(np.isfinite(basis)):
            raise LatticeError("non-finite basis")
        det = float(np.linalg.det(basis))
        if abs(det) <= 1e-12:
            raise LatticeError("singular basis")
        self.basis = basis
        self.basis.setflags(write=False)
        self.dim = basis.shape[0]
        self.det = abs(det)
        self._U = lll_reduce(basis)
        self.reduced = basis @ self._U
        self._reduced_inv = np.linalg.inv(self.reduced)
        self._basis_inv = np.linalg.inv(basis)
        self.relevant_coords, self.relevant = self._relevant_vectors()
        self.covering_radius, self.bounding_box = self._cell_extent()

    @classmethod
    def integer(cls, d: int) -> "Lattice":
        return cls(np.eye(d))

    def _relevant_vectors(self):
        # Voronoi: v is relevant iff +-v are the only shortest vectors of v + 2L
        d = self.dim
        classes = {}
        for c in itertools.product(range(-3, 4), repeat=d):
            if not any(c):
                continue
            v = self.reduced @ np.array(c, dtype=float)
            parity = tuple(x % 2 for x in c)
            classes.setdefault(parity, []).append((float(v @ v), c))
        coords = []
        for members in classes.values():
            members.sort()
            best = members[0][0]
            shortest = [c for n, c in members if n <= best * (1 + 1e-9)]
            if len(shortest) == 2:
                coords.extend(shortest)
        coords = np.array(sorted(coords), dtype=np.int64)
        # express in the caller's basis coordinates
        lattice_coords = coords @ self._U.T
        vectors = coords @ self.reduced.T
        return lattice_coords, vectors

    def _cell_extent(self):
        d = self.dim
        if d == 1:
            h = 0.5 * self.det
            return h, np.array([h])
        from scipy.spatial import Voronoi

        pts = np.array(
            [self.reduced @ np.array(c, dtype=float) for c in itertools.product(range(-2, 3), repeat=d)]
        )
        vor = Voronoi(pts)
        origin = int(np.argmin(np.einsum("ij,ij->i", pts, pts)))
        region = vor.regions[vor.point_region[origin]]
        if -1 in region or not region:
            raise LatticeError("could not resolve the Voronoi cell")
        verts = vor.vertices[region]
        radius = float(np.max(np.linalg.norm(verts, axis=1)))
        return radius, np.max(np.abs(verts), axis=0)

    def coords_of(self, v):
        """Integer coordinates of lattice vectors ``v`` in the given basis."""
        return np.rint(np.asarray(v) @ self._basis_inv.T).astype(np.int64)

    def vector(self, coords):
        return np.asarray(coords, dtype=float) @ self.basis.T

    def __repr__(self):
        return f"Lattice(basis={self.basis.tolist()})"


def closest_lattice_point(L: Lattice, x):
    """Closest lattice vector to ``x`` (shape (d,) or (N, d)).

    Babai rounding in the reduced basis followed by descent along the
    Voronoi-relevant vectors, which terminates at the exact minimiser. Ties
    go to the lexicographically smallest integer coordinate vector.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[-1] != L.dim:
        raise LatticeError("dimension mismatch")
    coeff = np.rint(pts @ L._reduced_inv.T)
    v = coeff @ L.reduced.T
    rel = L.relevant
    while True:
        t = pts - v
        base = np.einsum("ij,ij->i", t, t)
        cand = t[:, None, :] - rel[None, :, :]
        norms = np.einsum("ijk,ijk->ij", cand, cand)
        j = np.argmin(norms, axis=1)
        best = norms[np.arange(len(pts)), j]
        move = best < base - TIE_TOL * np.maximum(1.0, base)
        if not np.any(move):
            break
        v[move] += rel[j[move]]
    v = _break_ties(L, pts, v)
    return v[0] if single else v


def _break_ties(L, pts, v):
    t = pts - v
    base = np.einsum("ij,ij->i", t, t)
    cand = t[:, None, :] - L.relevant[None, :, :]
    norms = np.einsum("ijk,ijk->ij", cand, cand)
    tied = np.abs(norms - base[:, None]) <= TIE_TOL * np.maximum(1.0, base[:, None])
    for i in np.flatnonzero(tied.any(axis=1)):
        options = [v[i]] + [v[i] + L.relevant[j] for j in np.flatnonzero(tied[i])]
        v[i] = min(options, key=lambda u: tuple(L.coords_of(u)))
    return v


def voronoi_membership(L: Lattice, x):
    """Open-cell membership: |x| < |x - v| for every relevant v.

    Points within 1e-12 of a facet count as outside.
    """
    x = np.asarray(x, dtype=float)
    pts = np.atleast_2d(x)
    # |x - v|^2 - |x|^2 = |v|^2 - 2 x.v
    margin = np.einsum("jk,jk->j", L.relevant, L.relevant)[None, :] - 2.0 * pts @ L.relevant.T
    inside = np.all(margin > TIE_TOL, axis=1)
    return bool(inside[0]) if x.ndim == 1 else inside


def lift_to_cell(L: Lattice, center, y_class):
    """Representative of ``y_class + L`` lying in the Voronoi cell around ``center``."""
    y = np.asarray(y_class, dtype=float)
    c = np.asarray(center, dtype=float)
    return y - closest_lattice_point(L, y - c)


def sample_voronoi(L: Lattice, stream, index=0, max_rejections: int = 10**6):
    """Uniform point(s) of the open Voronoi cell of 0, by box rejection.

    Draw ``k`` with attempt ``j`` uses the uniforms of ``(seed, k, j)``, so the
    result for each index is independent of batch composition.
    """
    return draw_cell_points(L, stream.seed, index, max_rejections)


def draw_cell_points(L: Lattice, seeds, index, max_rejections: int = 10**6):
    """Like :func:`sample_voronoi` but with one seed per entry (for ensembles)."""
    seeds = np.asarray(seeds, dtype=np.uint64)
    index = np.asarray(index, dtype=np.uint64)
    seeds, index = np.broadcast_arrays(seeds, index)
    shape = seeds.shape
    seeds, index = seeds.ravel(), index.ravel()
    out = np.empty((seeds.size, L.dim))
    pending = np.arange(seeds.size)
    attempt = 0
    while pending.size:
        if attempt >= max_rejections:
            raise LatticeError("too many rejections (degenerate basis?)")
        u = uniforms(seeds[pending], index[pending], attempt, L.dim)
        cand = (2.0 * u - 1.0) * L.bounding_box
        ok = voronoi_membership(L, cand)
        out[pending[ok]] = cand[ok]
        pending = pending[~ok]
        attempt += 1
    return out.reshape(shape + (L.dim,))


def cell_volume(L: Lattice) -> float:
    return L.det


def covering_radius(L: Lattice) -> float:
    return L.covering_radius

