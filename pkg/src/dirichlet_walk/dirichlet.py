"""Dirichlet domains, unique lifts, the step kernel and the non-local perimeter.

Two concrete contexts share one duck-typed surface:

* :class:`HyperbolicContext` - the genus-2 surface group acting on the upper
  half-plane, points are complex numbers;
* :class:`TorusContext` - a lattice acting on ``R^d`` by translations, points
  are float vectors.

Both expose ``R_dom`` (circumradius of the canonical domain D(o)), ``vol0``
(volume of the quotient), ``in_domain``, ``lift``, ``kernel`` and the batched
increment sampler used by the walk engine.
"""

from __future__ import annotations

import functools
import math

import numpy as np

from . import _kernels as K
from .groups import Presentation, GroupElement, build_ball, genus2_presentation, lattice_presentation
from .hyperbolic import ScaledIsometry, disk_area, dist, mobius, polar_point, radial_quantile
from .lattice import Lattice, closest_lattice_point, draw_cell_points, voronoi_membership
from .streams import uniforms

R_DOM_MARGIN = 1.05
MAX_INCREMENT_REJECTIONS = 10**4


class DomainError(RuntimeError):
    pass


class TieError(DomainError):
    """Two lifts at the same distance (a probability-zero event)."""


class HyperbolicContext:
    """Genus-2 cover of the regular-octagon surface.

    ``R_dom`` is 5% above the largest distance to ``o`` seen over
    ``n_probe`` uniform samples of D(o); ``ball`` holds every group element
    with displacement up to ``4 R_dom`` plus a small slack, which is enough to
    lift any increment into the Dirichlet domain of any point of D(o).
    """

    kind = "fuchsian"

    def __init__(self, presentation: Presentation | None = None, n_probe: int = 10**6, probe_radius: float = 3.0, seed: int = 20240917):
        self.presentation = presentation or genus2_presentation()
        self.vol0 = 4.0 * math.pi  # Gauss-Bonnet, genus 2
        probe_ball = build_ball(self.presentation, 2.0 * probe_radius + 0.1)
        self._use_ball(probe_ball)
        far = self._probe_circumradius(probe_radius, n_probe, seed)
        if far > 0.98 * probe_radius:
            raise DomainError("probe radius too small for the fundamental domain")
        self.R_dom_sampled = far
        self.R_dom = R_DOM_MARGIN * far
        self.n_probe = n_probe
        self._use_ball(build_ball(self.presentation, 4.0 * self.R_dom + 0.05))
        self.side_pairings = np.array(self.presentation.generators)

    def _use_ball(self, ball):
        self.ball = ball
        m = ball.mats
        self._a = np.ascontiguousarray(m[:, 0, 0])
        self._b = np.ascontiguousarray(m[:, 0, 1])
        self._c = np.ascontiguousarray(m[:, 1, 0])
        self._d = np.ascontiguousarray(m[:, 1, 1])
        self._disp = np.ascontiguousarray(ball.disp)

    @property
    def ball_arrays(self):
        return self._a, self._b, self._c, self._d, self._disp

    def _probe_circumradius(self, radius, n_probe, seed):
        far = 0.0
        found = 0
        index = 0
        while found < n_probe:
            batch = np.arange(index, index + 2**18, dtype=np.uint64)
            index += len(batch)
            u = uniforms(seed, batch, 0, 2)
            z = polar_point(radial_quantile(u[:, 0], radius), 2 * math.pi * u[:, 1])
            inside = self.member_o(z)
            pts = z[inside][: n_probe - found]
            found += len(pts)
            if len(pts):
                far = max(far, float(np.max(dist(pts, 1j))))
        return far

    # -- membership -----------------------------------------------------

    def member_o(self, z):
        """Vectorised membership in the canonical domain D(o)."""
        z = np.ascontiguousarray(np.atleast_1d(z), dtype=complex)
        center = np.full(z.shape, 1j)
        st = K.in_domain_batch(z, center, np.zeros(z.shape), *self.ball_arrays, self.ball.radius)
        if np.any(st == K.UNCERTIFIED):
            raise DomainError("point outside certified radius")
        return st == K.MEMBER

    def reduce(self, z):
        """Write points as ``h . w`` with ``w`` in D(o).

        Greedy side-pairing descent: while some neighbour tile centre is
        closer than ``o``, pull the point back through that side. Returns
        ``(h, w)`` with ``h`` a stack of matrices.
        """
        z = np.array(np.atleast_1d(z), dtype=complex)
        h = np.tile(np.eye(2), (len(z), 1, 1))
        gens = self.side_pairings
        inv = np.linalg.inv(gens)
        centers = mobius(gens, 1j)
        for _ in range(10000):
            d0 = dist(z, 1j)
            dn = dist(z[:, None], centers[None, :])
            j = np.argmin(dn, axis=1)
            move = dn[np.arange(len(z)), j] < np.atleast_1d(d0) - K.TIE
            if not np.any(move):
                break
            idx = np.flatnonzero(move)
            z[idx] = mobius(inv[j[idx]], z[idx])
            h[idx] = h[idx] @ gens[j[idx]]
        else:
            raise DomainError("reduction did not terminate")
        if not np.all(self.member_o(z)):
            raise DomainError("reduction left a point outside D(o)")
        return h, z

    def in_domain(self, center, z):
        """z in D_center, strictly (ties within 1e-12 count as outside)."""
        c = np.atleast_1d(np.asarray(center, dtype=complex))
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        c, z = np.broadcast_arrays(c, z)
        h, cw = self.reduce(c)
        hinv = np.linalg.inv(h)
        zw = mobius(hinv, z)
        # D_c has diameter at most that of the surface, which is below 2 R_dom
        near = np.flatnonzero(dist(zw, cw) < 2.0 * self.R_dom)
        st = K.in_domain_batch(np.ascontiguousarray(zw[near]), np.ascontiguousarray(cw[near]), dist(cw[near], 1j), *self.ball_arrays, self.ball.radius)
        out = np.zeros(len(zw), dtype=bool)
        out[near] = st == K.MEMBER
        far = near[st == K.UNCERTIFIED]
        if far.size:
            out[far] = self._member_by_lift(cw[far], zw[far])
        return bool(out[0]) if np.ndim(center) == 0 and np.ndim(z) <= 1 and out.size == 1 else out

    def _member_by_lift(self, cw, zw):
        # z is in D_c exactly when lifting the class of z into D_c returns z
        _, xz = self.reduce(zw)
        k, st = K.lift_index_batch(cw, xz, dist(cw, 1j), dist(xz, 1j), *self.ball_arrays)
        if np.any(st == 2):
            raise DomainError("point outside certified radius")
        back = mobius(self.ball.mats[k], xz)
        return (st == 0) & (dist(back, zw) < 1e-6)

    # -- lifting --------------------------------------------------------

    def lift(self, center, increment):
        """Unique lift of the class of ``increment`` into D_center.

        ``increment`` must lie in D(o). Returns ``(gamma, point)`` where
        ``gamma`` is the group element with ``point = gamma . increment``.
        """
        x = complex(increment)
        if not self.member_o(x)[0]:
            raise DomainError("increment is not in D(o)")
        h, cw = self.reduce(complex(center))
        h, cw = h[0], complex(cw[0])
        k, st = K.lift_index(cw, x, float(dist(cw, 1j)), float(dist(x, 1j)), *self.ball_arrays)
        if st == 1:
            raise TieError("measure-zero tie encountered")
        if st == 2:
            raise DomainError("point outside certified radius")
        g = ScaledIsometry(h) @ ScaledIsometry(self.ball.mats[k])
        # word of h is not tracked by reduce; record the local step only when h is trivial
        word = self.ball.words[k] if np.allclose(h, np.eye(2)) else None
        gamma = GroupElement(word, g, float(K.dist_to_base_scaled(*g.m.ravel(), g.exponent)))
        return gamma, complex(mobius(g.m, x))

    def kernel(self, x, y):
        member = self.in_domain(x, y)
        return np.where(member, 1.0 / self.vol0, 0.0) if np.ndim(member) else (1.0 / self.vol0 if member else 0.0)

    def lift_multiplicity(self, z):
        """How many ball translates of each point land strictly inside D(o)."""
        z = np.ascontiguousarray(np.atleast_1d(z), dtype=complex)
        out = K.lift_multiplicity(z, *self.ball_arrays, self.ball.radius, self.R_dom)
        if np.any(out < 0):
            raise DomainError("point outside certified radius")
        return out

    # -- sampling -------------------------------------------------------

    def draw_increments(self, seeds, index):
        """Uniform points of D(o), one per (seed, index) pair.

        Rejection from the disk B(o, R_dom); attempt ``j`` of draw ``k`` uses
        the uniforms of ``(seed, k, j)`` so results do not depend on batching.
        """
        seeds = np.asarray(seeds, dtype=np.uint64)
        index = np.asarray(index, dtype=np.uint64)
        seeds, index = np.broadcast_arrays(seeds, index)
        shape = seeds.shape
        seeds, index = seeds.ravel(), index.ravel()
        out = np.empty(seeds.size, dtype=complex)
        pending = np.arange(seeds.size)
        attempt = 0
        while pending.size:
            if attempt >= MAX_INCREMENT_REJECTIONS:
                raise DomainError("too many rejections while sampling D(o)")
            u = uniforms(seeds[pending], index[pending], attempt, 2)
            z = polar_point(radial_quantile(u[:, 0], self.R_dom), 2 * math.pi * u[:, 1])
            ok = self.member_o(z)
            out[pending[ok]] = z[ok]
            pending = pending[~ok]
            attempt += 1
        return out.reshape(shape)

    @property
    def acceptance_rate(self) -> float:
        return self.vol0 / disk_area(self.R_dom)

    def origin(self):
        return 1j

    def dist(self, p, q):
        return dist(p, q)


class TorusContext:
    """Universal cover ``R^d`` of the flat torus ``R^d / L``."""

    kind = "lattice"

    def __init__(self, lattice: Lattice | Presentation):
        if isinstance(lattice, Presentation):
            self.presentation = lattice
            lattice = lattice.lattice
        else:
            self.presentation = lattice_presentation(lattice)
        self.lattice = lattice
        self.dim = lattice.dim
        self.vol0 = lattice.det
        self.R_dom = lattice.covering_radius
        self.ball = build_ball(self.presentation, 2.0 * self.R_dom + 1e-9)

    def member_o(self, z):
        return voronoi_membership(self.lattice, z)

    def in_domain(self, center, z):
        return voronoi_membership(self.lattice, np.asarray(z, dtype=float) - np.asarray(center, dtype=float))

    def lift(self, center, increment):
        x = np.asarray(increment, dtype=float)
        v = closest_lattice_point(self.lattice, x - np.asarray(center, dtype=float))
        coords = self.lattice.coords_of(-v)
        gamma = GroupElement(None, coords, float(np.linalg.norm(v)))
        return gamma, x - v

    def kernel(self, x, y):
        member = self.in_domain(x, y)
        return np.where(member, 1.0 / self.vol0, 0.0) if np.ndim(member) else (1.0 / self.vol0 if member else 0.0)

    def draw_increments(self, seeds, index):
        return draw_cell_points(self.lattice, seeds, index)

    def origin(self):
        return np.zeros(self.dim)

    def dist(self, p, q):
        return np.linalg.norm(np.asarray(p) - np.asarray(q), axis=-1)


@functools.lru_cache(maxsize=None)
def genus2_context(n_probe: int = 10**6) -> HyperbolicContext:
    return HyperbolicContext(n_probe=n_probe)


@functools.lru_cache(maxsize=None)
def torus_context(name: str = "lattice:2") -> TorusContext:
    from .groups import presentation_from_name

    return TorusContext(presentation_from_name(name))


def context_from_name(name: str):
    """``genus2`` or any lattice spelling accepted by ``presentation_from_name``."""
    if name.strip().lower() == "genus2":
        return genus2_context()
    from .groups import presentation_from_name

    P = presentation_from_name(name)
    return torus_context(P.name)


# -- module-level operations -------------------------------------------------


def in_domain(ctx, center, z):
    return ctx.in_domain(center, z)


def lift(ctx, center, increment):
    return ctx.lift(center, increment)


def kernel(ctx, x, y):
    return ctx.kernel(x, y)


class PerimeterEstimate:
    __slots__ = ("radius", "ratio", "stderr", "n_samples")

    def __init__(self, radius, ratio, stderr, n_samples):
        self.radius = float(radius)
        self.ratio = float(ratio)
        self.stderr = float(stderr)
        self.n_samples = int(n_samples)

    def as_dict(self):
        return {"radius": self.radius, "ratio": self.ratio, "stderr": self.stderr, "n_samples": self.n_samples}

    def __repr__(self):
        return f"PerimeterEstimate(radius={self.radius}, ratio={self.ratio:.5f} +- {self.stderr:.5f})"


def nonlocal_perimeter_ratio(ctx, radius: float, n_samples: int, seed: int = 0, center=None) -> PerimeterEstimate:
    """Monte Carlo estimate of  int_U int_{U^c} p*2(x, y) / vol(U)  for U = B(center, radius).

    Draw x uniformly in U, one step z ~ p(x, .), a second step y ~ p(z, .)
    and report the fraction of y outside U. Sample ``t`` uses the seed
    ``trajectory_seeds(seed, n)[t]``: index 0 positions x, indices 1 and 2
    are the two increments.
    """
    from .streams import trajectory_seeds

    if n_samples < 1000:
        raise DomainError("need at least 1000 samples")
    seeds = trajectory_seeds(seed, n_samples)
    u = uniforms(seeds, 0, 0, max(2, getattr(ctx, "dim", 2)))
    if ctx.kind == "fuchsian":
        if center is not None and complex(center) != 1j:
            raise DomainError("only balls centred at the basepoint are supported")
        if not 0 < radius <= 20:
            raise DomainError("radius out of range")
        x = polar_point(radial_quantile(u[:, 0], radius), 2 * math.pi * u[:, 1])
        h, xw = ctx.reduce(x)
        X = np.stack([ctx.draw_increments(seeds, 1), ctx.draw_increments(seeds, 2)], axis=1)
        dists = np.zeros((n_samples, 3))
        steps = np.zeros((n_samples, 2), dtype=np.int32)
        angles = np.zeros((n_samples, 3))
        status = K.run_walk(X, h, np.zeros(n_samples, dtype=np.int64), xw, *ctx.ball_arrays, dists, steps, angles)
        ok = status == 0
        outside = dists[ok, 2] >= radius
    else:
        c = np.zeros(ctx.dim) if center is None else np.asarray(center, dtype=float)
        x = c + radius * _unit_ball(u, ctx.dim)
        L = ctx.lattice
        x1 = ctx.draw_increments(seeds, 1)
        x2 = ctx.draw_increments(seeds, 2)
        z = x1 - closest_lattice_point(L, x1 - x)
        y = x2 - closest_lattice_point(L, x2 - z)
        outside = np.linalg.norm(y - c, axis=1) >= radius
    n = len(outside)
    p = float(np.mean(outside))
    return PerimeterEstimate(radius, p, math.sqrt(max(p * (1 - p), 0.0) / n), n)


def _unit_ball(u, d):
    """Uniform points of the Euclidean unit ball from ``d`` uniforms each."""
    if d == 1:
        return (2 * u[:, :1] - 1)
    if d == 2:
        r = np.sqrt(u[:, 0])
        th = 2 * math.pi * u[:, 1]
        return np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
    r = np.cbrt(u[:, 0])
    cz = 2 * u[:, 1] - 1
    ph = 2 * math.pi * u[:, 2]
    sz = np.sqrt(1 - cz * cz)
    return np.stack([r * sz * np.cos(ph), r * sz * np.sin(ph), r * cz], axis=1)
