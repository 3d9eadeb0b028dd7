"""Deck-group presentations, displacement balls and Cayley-graph Folner ratios.

Two families are supported: translation lattices ``Z^d`` (d <= 3) acting on
``R^d``, and the genus-2 surface group acting on the upper half-plane through
the side pairings of the regular octagon with interior angles pi/4.

Group elements of the Fuchsian group are deduplicated through the point
``g . i`` (the action is free, so ``g -> g . i`` is injective). In hyperboloid
coordinates two distinct orbit points are at Euclidean distance at least
``sqrt(2 cosh(2 r_in) - 2) ~ 4.4``, far above floating-point noise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.spatial import cKDTree

from .hyperbolic import ScaledIsometry, mobius
from .lattice import Lattice

MAX_BALL = 10**6
RELATOR_TOL = 1e-9
MIN_GAP = 1e-3
_DEDUP_RADIUS = 0.5

# regular octagon with angles pi/4
OCTAGON_INRADIUS = math.acosh(1.0 + math.sqrt(2.0))
OCTAGON_CIRCUMRADIUS = math.acosh(3.0 + 2.0 * math.sqrt(2.0))


class GroupError(RuntimeError):
    pass


@dataclass(frozen=True)
class Presentation:
    """Finite presentation with formal inverses.

    ``generators[i]`` is a 2x2 matrix (fuchsian) or an integer coordinate
    vector (lattice); ``inverse[i]`` is the index of the inverse letter.
    """

    kind: str
    name: str
    generator_names: tuple
    generators: tuple
    inverse: tuple
    relators: tuple
    lattice: Lattice | None = None
    # upper bound for the circumradius of the fundamental tile, used as the BFS margin
    tile_radius: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n_letters(self) -> int:
        return len(self.generators)

    def evaluate(self, word):
        """Matrix (fuchsian, as ScaledIsometry) or coordinate vector of a word."""
        if self.kind == "lattice":
            out = np.zeros(self.lattice.dim, dtype=np.int64)
            for i in word:
                out = out + self.generators[i]
            return out
        g = ScaledIsometry.identity()
        for i in word:
            g = g @ ScaledIsometry(self.generators[i])
        return g

    def invert_word(self, word):
        return tuple(self.inverse[i] for i in reversed(word))

    def relator_error(self, word) -> float:
        if self.kind == "lattice":
            return float(np.abs(self.evaluate(word)).max())
        m = self.evaluate(word).matrix()
        return float(min(np.abs(m - np.eye(2)).max(), np.abs(m + np.eye(2)).max()))


def _rotation(phi):
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    return np.array([[c, s], [-s, c]])


def _translation(phi, length):
    a = np.diag([math.exp(length / 2), math.exp(-length / 2)])
    return _rotation(phi) @ a @ _rotation(-phi)


def _side_pairing(src: int, dst: int):
    """Isometry carrying octagon side ``src`` onto side ``dst``.

    Sides are centred at disk angles k*pi/4. The image of the octagon is the
    tile across side ``dst``.
    """
    th = lambda k: k * math.pi / 4
    turn = _rotation(th(dst) + math.pi - th(src))
    return _translation(th(dst), 2.0 * OCTAGON_INRADIUS) @ turn


def genus2_presentation() -> Presentation:
    """Surface group of genus 2 with relator [a1, b1][a2, b2]."""
    gens = {
        "a1": _side_pairing(2, 0),
        "b1": _side_pairing(1, 3),
        "a2": _side_pairing(6, 4),
        "b2": _side_pairing(5, 7),
    }
    names, mats, inverse = [], [], []
    for k, (name, g) in enumerate(gens.items()):
        names += [name, name.upper()]
        mats += [g, np.linalg.inv(g)]
        inverse += [2 * k + 1, 2 * k]
    a1, A1, b1, B1, a2, A2, b2, B2 = range(8)
    relator = (a1, b1, A1, B1, a2, b2, A2, B2)
    P = Presentation(
        kind="fuchsian",
        name="genus2",
        generator_names=tuple(names),
        generators=tuple(mats),
        inverse=tuple(inverse),
        relators=(relator,),
        tile_radius=OCTAGON_CIRCUMRADIUS,
    )
    err = P.relator_error(relator)
    if err > RELATOR_TOL:
        raise GroupError(f"relator check failed (error {err:.3e})")
    return P


def lattice_presentation(L: Lattice, name: str | None = None) -> Presentation:
    d = L.dim
    names, gens, inverse = [], [], []
    for i in range(d):
        e = np.zeros(d, dtype=np.int64)
        e[i] = 1
        names += [f"e{i + 1}", f"E{i + 1}"]
        gens += [e, -e]
        inverse += [2 * i + 1, 2 * i]
    relators = tuple((2 * i, 2 * j, 2 * i + 1, 2 * j + 1) for i in range(d) for j in range(i + 1, d))
    return Presentation(
        kind="lattice",
        name=name or f"lattice:{d}",
        generator_names=tuple(names),
        generators=tuple(gens),
        inverse=tuple(inverse),
        relators=relators,
        lattice=L,
        tile_radius=L.covering_radius,
    )


def parse_basis(text: str) -> np.ndarray:
    """``"1,0;0.5,1"`` -> matrix whose columns are the listed vectors."""
    rows = [[float(x) for x in part.split(",")] for part in text.split(";") if part.strip()]
    return np.array(rows, dtype=float).T


def presentation_from_name(name: str) -> Presentation:
    """Resolve ``genus2``, ``z1``..``z3``, ``lattice:<d>`` or ``lattice:<basis>``."""
    key = name.strip().lower()
    if key == "genus2":
        return genus2_presentation()
    if key in ("z1", "z2", "z3"):
        return lattice_presentation(Lattice.integer(int(key[1])), name=f"lattice:{key[1]}")
    if key.startswith("lattice:"):
        body = key.split(":", 1)[1]
        if body.isdigit():
            d = int(body)
            return lattice_presentation(Lattice.integer(d), name=f"lattice:{d}")
        return lattice_presentation(Lattice(parse_basis(body)), name=f"lattice:{body}")
    raise GroupError(f"unknown space {name!r}")


def hyperboloid(mats: np.ndarray) -> np.ndarray:
    """Hyperboloid coordinates of ``g . i`` for a stack of matrices (sign-invariant)."""
    a, b, c, d = mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1]
    return np.stack([0.5 * (a * a + b * b + c * c + d * d), 0.5 * (a * a + b * b - c * c - d * d), a * c + b * d], axis=1)


def displacement_of(mats: np.ndarray) -> np.ndarray:
    """d(i, g i) for a stack of unit-determinant matrices."""
    a, b, c, d = mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1]
    return 2.0 * np.arcsinh(0.5 * np.hypot(a - d, b + c))


@dataclass(frozen=True)
class GroupElement:
    word: tuple
    iso: object
    displacement: float


class GroupBall:
    """Group elements with displacement at most ``radius``, sorted by displacement.

    Array views (``mats``, ``disp``, ``centers`` or ``coords``/``vectors``)
    feed the vectorised kernels; ``elements`` gives the per-element view.
    """

    def __init__(self, presentation, radius, words, disp, mats=None, coords=None, min_gap=None):
        self.presentation = presentation
        self.radius = float(radius)
        self.words = list(words)
        self.disp = np.asarray(disp, dtype=float)
        self.mats = mats
        self.coords = coords
        self.min_gap = min_gap
        if mats is not None:
            self.centers = mobius(mats, 1j)
        if coords is not None:
            self.vectors = coords @ presentation.lattice.basis.T
        self.depth = max((len(w) for w in self.words), default=0)

    def __len__(self):
        return len(self.words)

    def element(self, k: int) -> GroupElement:
        if self.mats is not None:
            iso = ScaledIsometry(self.mats[k])
        else:
            iso = self.coords[k].copy()
        return GroupElement(tuple(self.words[k]), iso, float(self.disp[k]))

    @property
    def elements(self):
        return [self.element(k) for k in range(len(self))]

    def index_of_inverse(self) -> np.ndarray:
        """Index of each element's inverse inside the ball (-1 when missing)."""
        if self.mats is not None:
            inv = self.mats[:, ::-1, ::-1] * np.array([[1, -1], [-1, 1]])
            tree = cKDTree(hyperboloid(self.mats))
            dd, idx = tree.query(hyperboloid(inv), distance_upper_bound=_DEDUP_RADIUS)
        else:
            lookup = {tuple(c): k for k, c in enumerate(self.coords)}
            idx = np.array([lookup.get(tuple(-c), len(self)) for c in self.coords])
        return np.where(idx < len(self), idx, -1)


def build_ball(P: Presentation, radius: float) -> GroupBall:
    """All group elements whose basepoint displacement is at most ``radius``."""
    if radius < 0:
        raise GroupError("negative radius")
    if P.kind == "lattice":
        return _lattice_ball(P, radius)
    gen_disp = float(displacement_of(np.array(P.generators[:1]))[0])
    if radius > 4.0 * gen_disp + 1e-9:
        raise GroupError("radius too large (cost guard: at most 4 generator displacements)")
    return _fuchsian_ball(P, radius)


def _lattice_ball(P, radius):
    L = P.lattice
    inv = np.linalg.inv(L.basis)
    bound = np.ceil(radius * np.linalg.norm(inv, axis=1)).astype(int)
    axes = [np.arange(-b, b + 1) for b in bound]
    coords = np.array(list(itertools.product(*axes)), dtype=np.int64).reshape(-1, L.dim)
    vecs = coords @ L.basis.T
    disp = np.linalg.norm(vecs, axis=1)
    keep = disp <= radius + 1e-12
    coords, disp = coords[keep], disp[keep]
    if len(coords) > MAX_BALL:
        raise GroupError("radius too large")
    order = np.lexsort(tuple(coords.T[::-1]) + (np.round(disp, 12),))
    coords, disp = coords[order], disp[order]
    words = [_lattice_word(c) for c in coords]
    return GroupBall(P, radius, words, disp, coords=coords)


def _lattice_word(c):
    word = []
    for i, x in enumerate(c):
        word += [2 * i if x > 0 else 2 * i + 1] * abs(int(x))
    return tuple(word)


def _fuchsian_ball(P, radius):
    # Tiles met by the geodesic [o, g o] form a side-adjacent chain whose
    # centres lie within the tile circumradius of that geodesic, so pruning at
    # radius + tile_radius cannot disconnect any element of the ball.
    limit = radius + P.tile_radius * 1.05
    gens = np.array(P.generators)
    mats = [np.eye(2)[None]]
    words = [[()]]
    frontier_m, frontier_w = mats[0], words[0]
    known = hyperboloid(mats[0])
    total = 1
    while len(frontier_m):
        cand = np.einsum("nij,gjk->ngik", frontier_m, gens).reshape(-1, 2, 2)
        parent = np.repeat(np.arange(len(frontier_m)), len(gens))
        letter = np.tile(np.arange(len(gens)), len(frontier_m))
        keep = displacement_of(cand) <= limit
        cand, parent, letter = cand[keep], parent[keep], letter[keep]
        pts = hyperboloid(cand)
        fresh = _unseen(known, pts) & _first_copies(pts)
        cand, parent, letter, pts = cand[fresh], parent[fresh], letter[fresh], pts[fresh]
        frontier_w = [frontier_w[p] + (int(s),) for p, s in zip(parent, letter)]
        frontier_m = cand
        total += len(cand)
        if total > MAX_BALL:
            raise GroupError("radius too large")
        mats.append(cand)
        words.append(frontier_w)
        known = np.concatenate([known, pts])
    allm = np.concatenate(mats)
    allw = [w for layer in words for w in layer]
    disp = displacement_of(allm)
    keep = np.flatnonzero(disp <= radius + 1e-12)
    order = keep[np.lexsort((np.array([len(allw[k]) for k in keep]), disp[keep]))]
    allm = allm[order]
    allw = [allw[k] for k in order]
    gap = _min_gap(allm)
    if gap < MIN_GAP:
        raise GroupError(f"dedup audit failed: distinct elements only {gap:.2e} apart")
    return GroupBall(P, radius, allw, disp[order], mats=allm, min_gap=gap)


def _unseen(known, pts):
    if not len(pts):
        return np.zeros(0, dtype=bool)
    dd, _ = cKDTree(known).query(pts, distance_upper_bound=_DEDUP_RADIUS)
    return ~np.isfinite(dd)


def _first_copies(pts, audit=False):
    keep = np.ones(len(pts), dtype=bool)
    if len(pts) < 2:
        return keep
    radius = _AMBIGUOUS_HI if audit else _DEDUP_RADIUS
    pairs = cKDTree(pts).query_pairs(radius, output_type="ndarray")
    if len(pairs):
        if audit:
            gap = np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1)
            _audit(gap)
            pairs = pairs[gap < _AMBIGUOUS_LO]
        keep[np.maximum(pairs[:, 0], pairs[:, 1])] = False
    return keep


def _min_gap(mats):
    """Smallest hyperbolic distance between orbit points of distinct elements."""
    if len(mats) < 2:
        return math.inf
    pts = hyperboloid(mats)
    _, idx = cKDTree(pts).query(pts, k=2)
    other = pts[idx[:, 1]]
    cosh = pts[:, 0] * other[:, 0] - pts[:, 1] * other[:, 1] - pts[:, 2] * other[:, 2]
    return float(np.min(np.arccosh(np.maximum(cosh, 1.0))))


# ---------------------------------------------------------------------------
# word-metric spheres and Folner ratios


def sphere_profile(P: Presentation, n_max: int):
    """Sphere sizes ``|S(k)|`` and forward edge counts for k = 0..n_max.

    ``forward[k]`` is the number of Cayley-graph edges from S(k) to S(k+1),
    i.e. the edge boundary of the word ball B(k). It is obtained as
    ``deg |S(k)| - back[k] - 2 same[k]`` where ``back[k]`` counts edges into
    S(k-1) and ``same[k]`` edges inside S(k). When every relator has even
    length the Cayley graph is bipartite and ``same`` vanishes identically.
    """
    if P.kind == "lattice":
        limit = 200
    else:
        limit = 12
    if n_max > limit:
        raise GroupError(f"word radius {n_max} exceeds the supported maximum {limit}")
    bipartite = all(len(r) % 2 == 0 for r in P.relators)
    if not bipartite:
        raise GroupError("presentation with odd relators: only bipartite Cayley graphs are supported")
    deg = P.n_letters
    sizes = [1]
    back = [0]
    for layer_size, edges_in in _sphere_layers(P, n_max):
        sizes.append(layer_size)
        back.append(edges_in)
    forward = [deg * sizes[k] - back[k] for k in range(n_max + 1)]
    # consistency: edges counted from both ends
    for k in range(n_max):
        if forward[k] != back[k + 1]:
            raise GroupError("edge bookkeeping mismatch")
    return np.array(sizes), np.array(forward)


def _sphere_layers(P, n_max):
    """Yield ``(|S(k)|, edges S(k-1)--S(k))`` for k = 1..n_max."""
    if P.kind == "lattice":
        yield from _lattice_layers(P, n_max)
    else:
        yield from _fuchsian_layers(P, n_max)


def _lattice_layers(P, n_max):
    d = P.lattice.dim
    gens = np.array(P.generators)
    span = 2 * (n_max + 2) + 1
    encode = lambda c: np.ravel_multi_index(tuple((c + n_max + 2).T), (span,) * d)
    prev = np.zeros(0, dtype=np.int64)
    cur_c = np.zeros((1, d), dtype=np.int64)
    cur = encode(cur_c)
    for _ in range(n_max):
        cand = (cur_c[:, None, :] + gens[None, :, :]).reshape(-1, d)
        keys = encode(cand)
        seen = np.isin(keys, prev) | np.isin(keys, cur)
        new_keys, first = np.unique(keys[~seen], return_index=True)
        edges = int(np.count_nonzero(~seen))
        yield len(new_keys), edges
        prev, cur = cur, new_keys
        cur_c = cand[~seen][first]


def _fuchsian_layers(P, n_max):
    # Rounding in the orbit points grows roughly like the displacement, so the
    # layers are built in extended precision and every lookup is audited.
    gens = np.array(P.generators, dtype=np.longdouble)
    prev_pts = np.zeros((0, 3))
    cur_m = np.eye(2, dtype=np.longdouble)[None]
    cur_pts = _ext_hyperboloid(cur_m)
    for _ in range(n_max):
        cand = np.einsum("nij,gjk->ngik", cur_m, gens).reshape(-1, 2, 2)
        det = cand[:, 0, 0] * cand[:, 1, 1] - cand[:, 0, 1] * cand[:, 1, 0]
        cand /= np.sqrt(det)[:, None, None]
        pts = _ext_hyperboloid(cand)
        known = np.vstack([prev_pts, cur_pts])
        dd, _ = cKDTree(known).query(pts, distance_upper_bound=_AMBIGUOUS_HI)
        _audit(dd)
        seen = dd < _AMBIGUOUS_LO
        fwd_m, fwd_pts = cand[~seen], pts[~seen]
        edges = len(fwd_m)
        first = _first_copies(fwd_pts, audit=True)
        yield int(first.sum()), edges
        prev_pts, cur_pts, cur_m = cur_pts, fwd_pts[first], fwd_m[first]
        del cand, pts


# hyperboloid separation of distinct elements is >= 4.4; copies of one element
# must agree far better than that or the layer count cannot be trusted
_AMBIGUOUS_LO = 0.05
_AMBIGUOUS_HI = 4.0


def _ext_hyperboloid(mats):
    a, b, c, d = mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1]
    out = np.stack([(a * a + b * b + c * c + d * d) / 2, (a * a + b * b - c * c - d * d) / 2, a * c + b * d], axis=1)
    return out.astype(np.float64)


def _audit(dd):
    bad = (dd >= _AMBIGUOUS_LO) & (dd < _AMBIGUOUS_HI)
    if np.any(bad):
        raise GroupError("floating-point precision exhausted while deduplicating group elements")


def folner_ratio(P: Presentation, n: int) -> Fraction:
    """#(edge boundary of the word ball B(n)) / |B(n)|, exactly."""
    sizes, forward = sphere_profile(P, n)
    return Fraction(int(forward[n]), int(sizes[: n + 1].sum()))


def folner_ratios(P: Presentation, radii) -> list:
    radii = list(radii)
    sizes, forward = sphere_profile(P, max(radii))
    return [Fraction(int(forward[n]), int(sizes[: n + 1].sum())) for n in radii]


def boundary_count_direct(P: Presentation, n: int) -> int:
    """Edge boundary of B(n) by explicit membership tests (small n only)."""
    ball = _word_ball_points(P, n)
    gens = np.array(P.generators)
    if P.kind == "lattice":
        members = {tuple(c) for c in ball}
        return sum(tuple(c + s) not in members for c in ball for s in gens)
    cand = np.einsum("nij,gjk->ngik", ball, gens).reshape(-1, 2, 2)
    return int(_unseen(hyperboloid(ball), hyperboloid(cand)).sum())


def _word_ball_points(P, n):
    if P.kind == "lattice":
        d = P.lattice.dim
        pts = [np.zeros(d, dtype=np.int64)]
        seen = {tuple(pts[0])}
        frontier = list(pts)
        for _ in range(n):
            nxt = []
            for c in frontier:
                for s in P.generators:
                    t = tuple(c + s)
                    if t not in seen:
                        seen.add(t)
                        nxt.append(c + s)
            pts += nxt
            frontier = nxt
        return np.array(pts)
    gens = np.array(P.generators)
    layers = [np.eye(2)[None]]
    known = hyperboloid(layers[0])
    frontier = layers[0]
    for _ in range(n):
        cand = np.einsum("nij,gjk->ngik", frontier, gens).reshape(-1, 2, 2)
        pts = hyperboloid(cand)
        fresh = _unseen(known, pts) & _first_copies(pts)
        frontier = cand[fresh]
        known = np.concatenate([known, pts[fresh]])
        layers.append(frontier)
    return np.concatenate(layers)
