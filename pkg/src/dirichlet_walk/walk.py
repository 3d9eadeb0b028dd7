"""Trajectory simulation for the Dirichlet random walk.

The position is kept factored as ``Z_n = g_n . w_n`` with ``w_n`` in D(o) and
``g_n`` a deck transformation. Each step lifts the next increment ``x`` into
the Dirichlet domain of ``Z_n``: ``gamma' = argmin d(gamma' x, w_n)`` over the
precomputed ball, then ``g <- g gamma'`` and ``w <- x``. Pair distances are
always recomputed from the chain of local steps, never from the absolute
products, so long trajectories stay accurate.

Increment ``X_k`` of a trajectory with seed ``s`` is a pure function of
``(s, k)``; a trajectory with shift ``n`` consumes ``X_{n+1}, X_{n+2}, ...``.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .dirichlet import DomainError, TieError, context_from_name
from .hyperbolic import ScaledIsometry
from .lattice import closest_lattice_point
from .streams import IncrementStream, trajectory_seeds

MAX_STEPS = 10**6
MAX_EXCLUDED_FRACTION = 1e-4
CSV_SCHEMA = "dirichlet-walk trajectory v1"
CSV_COLUMNS = ("step", "dist", "word_length", "angle")
_CHUNK_CELLS = 2**21  # increments held in memory at once


class WalkError(RuntimeError):
    pass


@dataclass
class WalkState:
    """Factored position ``Z = g . w``.

    ``g`` is a :class:`ScaledIsometry` (genus 2) or an integer coordinate
    vector (tori); ``w`` is a point of D(o).
    """

    g: object
    w: object
    step_index: int = 0

    def position(self, ctx):
        if ctx.kind == "fuchsian":
            return complex(self.g(self.w))
        return ctx.lattice.vector(self.g) + np.asarray(self.w)

    def dist_to_origin(self, ctx) -> float:
        if ctx.kind == "fuchsian":
            h = self.g @ ScaledIsometry.translator(self.w)
            m = h.m
            return float(K.dist_to_base_scaled(m[0, 0], m[0, 1], m[1, 0], m[1, 1], h.exponent))
        return float(np.linalg.norm(self.position(ctx)))


def initial_state(ctx) -> WalkState:
    if ctx.kind == "fuchsian":
        return WalkState(ScaledIsometry.identity(), 1j, 0)
    return WalkState(np.zeros(ctx.dim, dtype=np.int64), np.zeros(ctx.dim), 0)


def draw_increment(ctx, stream: IncrementStream, k: int):
    """Increment ``X_k`` of ``stream``: uniform in D(o), deterministic in (seed, k)."""
    out = ctx.draw_increments(np.uint64(stream.seed), k)
    return complex(out) if ctx.kind == "fuchsian" else np.asarray(out)


def step(ctx, state: WalkState, x) -> WalkState:
    """One move of the walk from ``state`` using the increment ``x`` in D(o)."""
    if ctx.kind == "fuchsian":
        x = complex(x)
        if not ctx.member_o(x)[0]:
            raise DomainError("increment is not in D(o)")
        w = complex(state.w)
        k, st = K.lift_index(w, x, float(ctx.dist(w, 1j)), float(ctx.dist(x, 1j)), *ctx.ball_arrays)
        if st == 1:
            raise TieError("measure-zero tie encountered")
        if st == 2:
            raise DomainError("lift ball exhausted")
        return WalkState(state.g @ ScaledIsometry(ctx.ball.mats[k]), x, state.step_index + 1)
    x = np.asarray(x, dtype=float)
    if not ctx.member_o(x):
        raise DomainError("increment is not in D(o)")
    v = closest_lattice_point(ctx.lattice, x - np.asarray(state.w))
    return WalkState(state.g - ctx.lattice.coords_of(v), x, state.step_index + 1)


# -- ensembles ------------------------------------------------------------


@dataclass
class Ensemble:
    """Independent trajectories sharing a context, step count and shift.

    ``dists[t, n] = d(o, Z_n)``. With ``keep_path`` the factored path is kept:
    genus 2 stores ball indices ``steps[t, n-1]`` of the local moves and local
    points ``w[t, n]``; tori store integer coordinates ``g[t, n]`` and ``w``.
    """

    ctx: object
    seeds: np.ndarray
    shift: int
    dists: np.ndarray
    angles: np.ndarray | None = None
    steps: np.ndarray | None = None
    w: np.ndarray | None = None
    g: np.ndarray | None = None
    excluded: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_trajectories(self) -> int:
        return self.dists.shape[0]

    @property
    def n_steps(self) -> int:
        return self.dists.shape[1] - 1

    @property
    def space(self) -> str:
        return self.ctx.presentation.name

    def trajectory(self, t: int) -> "Trajectory":
        pick = lambda a: None if a is None else a[t]
        return Trajectory(
            self.ctx,
            self.dists[t],
            {"seed": int(self.seeds[t]), "shift": self.shift, "space": self.space},
            angles=pick(self.angles),
            steps=pick(self.steps),
            w=pick(self.w),
            g=pick(self.g),
        )

    def pair_distances(self, start: int, stop: int | None = None) -> np.ndarray:
        """``out[t, j] = d(Z_start, Z_{start+j})`` for ``start + j <= stop``."""
        stop = self.n_steps if stop is None else stop
        if not 0 <= start <= stop <= self.n_steps:
            raise WalkError("indices out of range")
        self._need_path()
        if self.ctx.kind == "fuchsian":
            out = np.empty((self.n_trajectories, stop - start + 1))
            K.distances_from(self.steps, self.w, start, *self.ctx.ball_arrays[:4], out)
            return out
        L = self.ctx.lattice
        pos = L.vector(self.g[:, start : stop + 1]) + self.w[:, start : stop + 1]
        return np.linalg.norm(pos - pos[:, :1], axis=-1)

    def _need_path(self):
        if self.w is None:
            raise WalkError("ensemble was simulated without keep_path")


@dataclass
class Trajectory:
    ctx: object
    dists: np.ndarray
    meta: dict
    angles: np.ndarray | None = None
    steps: np.ndarray | None = None
    w: np.ndarray | None = None
    g: np.ndarray | None = None

    def __len__(self):
        return len(self.dists)

    @property
    def states(self):
        """The factored states, rebuilt on demand."""
        if self.w is None:
            raise WalkError("trajectory was simulated without keep_path")
        if self.ctx.kind != "fuchsian":
            return [WalkState(self.g[n].copy(), self.w[n].copy(), n) for n in range(len(self))]
        out = [WalkState(ScaledIsometry.identity(), complex(self.w[0]), 0)]
        mats = self.ctx.ball.mats
        for n, k in enumerate(self.steps, start=1):
            out.append(WalkState(out[-1].g @ ScaledIsometry(mats[k]), complex(self.w[n]), n))
        return out

    def pair_distance(self, a: int, b: int) -> float:
        if a > b:
            a, b = b, a
        if self.ctx.kind == "fuchsian":
            out = np.empty((1, b - a + 1))
            K.distances_from(self.steps[None], self.w[None], a, *self.ctx.ball_arrays[:4], out)
            return float(out[0, -1])
        L = self.ctx.lattice
        za = L.vector(self.g[a]) + self.w[a]
        zb = L.vector(self.g[b]) + self.w[b]
        return float(np.linalg.norm(zb - za))

    def word_lengths(self) -> np.ndarray:
        """Length of a word for ``g_n``.

        Tori: the exact word length in the basis generators (L1 norm of the
        coordinates). Genus 2: the freely reduced concatenation of the local
        step words, an upper bound for the true word length.
        """
        if self.ctx.kind != "fuchsian":
            return np.abs(self.g).sum(axis=1)
        inv = self.ctx.presentation.inverse
        words = self.ctx.ball.words
        stack = []
        out = [0]
        for k in self.steps:
            for letter in words[k]:
                if stack and stack[-1] == inv[letter]:
                    stack.pop()
                else:
                    stack.append(letter)
            out.append(len(stack))
        return np.array(out)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {CSV_SCHEMA}; space={self.meta['space']}; seed={self.meta['seed']}; shift={self.meta['shift']}\n")
        wr = csv.writer(buf, lineterminator="\r\n")
        wr.writerow(CSV_COLUMNS)
        lengths = self.word_lengths() if self.w is not None else [""] * len(self)
        for n in range(len(self)):
            ang = "" if self.angles is None else repr(float(self.angles[n]))
            wr.writerow((n, repr(float(self.dists[n])), int(lengths[n]) if lengths[n] != "" else "", ang))
        return buf.getvalue()


def simulate(space, n_steps: int, seed: int, shift: int = 0) -> Trajectory:
    """Single trajectory driven by ``X_{shift+1}, ..., X_{shift+n_steps}`` of ``seed``."""
    ctx = context_from_name(space) if isinstance(space, str) else space
    ens = simulate_seeds(ctx, n_steps, np.array([seed], dtype=np.uint64), shift, tolerate_ties=False)
    return ens.trajectory(0)


def simulate_ensemble(
    ctx, n_steps: int, n_trajectories: int, seed: int, shift: int = 0, keep_path: bool = True, workers: int = 1
) -> Ensemble:
    """``n_trajectories`` walks with seeds derived from ``seed``."""
    seeds = trajectory_seeds(seed, n_trajectories)
    ens = simulate_seeds(ctx, n_steps, seeds, shift, keep_path=keep_path, workers=workers)
    ens.meta["base_seed"] = int(seed)
    return ens


def simulate_seeds(ctx, n_steps, seeds, shift=0, keep_path=True, tolerate_ties=True, workers=1) -> Ensemble:
    """Walks for explicit per-trajectory seeds.

    Trajectories that hit a (probability-zero) lift tie are dropped and
    counted in ``excluded``; more than 0.01% of them aborts the run.
    ``workers`` > 1 spreads genus-2 chunks over threads without changing
    the result.
    """
    if not 0 <= n_steps <= MAX_STEPS:
        raise WalkError(f"n_steps must lie in [0, {MAX_STEPS}]")
    if shift < 0:
        raise WalkError("shift must be non-negative")
    seeds = np.asarray(seeds, dtype=np.uint64)
    if ctx.kind == "fuchsian":
        ens = _simulate_fuchsian(ctx, n_steps, seeds, shift, keep_path, workers)
    else:
        ens = _simulate_torus(ctx, n_steps, seeds, shift, keep_path)
    if ens.excluded:
        if not tolerate_ties:
            raise TieError("measure-zero tie encountered")
        if ens.excluded > MAX_EXCLUDED_FRACTION * (ens.excluded + ens.n_trajectories):
            raise WalkError(f"{ens.excluded} trajectories hit ties; numeric problem suspected")
    return ens


def _simulate_fuchsian(ctx, n, seeds, shift, keep_path, workers=1):
    T = len(seeds)
    dists = np.zeros((T, n + 1))
    angles = np.zeros((T, n + 1))
    steps = np.zeros((T, n), dtype=np.int32) if keep_path else None
    w = np.empty((T, n + 1), dtype=complex) if keep_path else None
    status = np.zeros(T, dtype=np.int8)
    chunk = max(1, _CHUNK_CELLS // max(n, 1) // max(workers, 1))
    idx = np.arange(shift + 1, shift + n + 1, dtype=np.uint64)

    def run_chunk(lo):
        hi = min(T, lo + chunk)
        X = np.ascontiguousarray(ctx.draw_increments(seeds[lo:hi, None], idx[None, :]).reshape(hi - lo, n))
        g0 = np.tile(np.eye(2), (hi - lo, 1, 1))
        s0 = np.zeros(hi - lo, dtype=np.int64)
        w0 = np.full(hi - lo, 1j)
        st_buf = np.zeros((hi - lo, n), dtype=np.int32)
        status[lo:hi] = K.run_walk(X, g0, s0, w0, *ctx.ball_arrays, dists[lo:hi], st_buf, angles[lo:hi])
        if keep_path:
            steps[lo:hi] = st_buf
            w[lo:hi, 0] = 1j
            w[lo:hi, 1:] = X

    starts = range(0, T, chunk)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_chunk, starts))
    else:
        for lo in starts:
            run_chunk(lo)
    if np.any(status == 2):
        raise DomainError("lift ball exhausted")
    ok = status == 0
    drop = lambda a: None if a is None else a[ok]
    return Ensemble(
        ctx, seeds[ok], shift, dists[ok], angles[ok], drop(steps), drop(w), None, int(np.sum(~ok)), {}
    )


def _simulate_torus(ctx, n, seeds, shift, keep_path):
    T = len(seeds)
    L = ctx.lattice
    d = ctx.dim
    dists = np.zeros((T, n + 1))
    g = np.zeros((T, d), dtype=np.int64)
    w = np.zeros((T, d))
    gs = np.zeros((T, n + 1, d), dtype=np.int64) if keep_path else None
    ws = np.zeros((T, n + 1, d)) if keep_path else None
    for j in range(n):
        x = ctx.draw_increments(seeds, shift + j + 1)
        v = closest_lattice_point(L, x - w)
        g = g - L.coords_of(v)
        w = x
        dists[:, j + 1] = np.linalg.norm(L.vector(g) + w, axis=1)
        if keep_path:
            gs[:, j + 1] = g
            ws[:, j + 1] = w
    return Ensemble(ctx, seeds, shift, dists, None, None, ws, gs, 0, {})


# -- coupled quantities ---------------------------------------------------


def defect(A: Trajectory, B: Trajectory, n: int, m: int) -> float:
    """``Psi_{n,m} = f_{n+m} - f_n - f_m o T^n`` from a coupled pair."""
    if A.meta["seed"] != B.meta["seed"] or B.meta["shift"] != A.meta["shift"] + n:
        raise WalkError("trajectories are not coupled (seed or shift mismatch)")
    if n + m >= len(A) or m >= len(B):
        raise WalkError("indices out of range")
    return float(A.dists[n + m] - A.dists[n] - B.dists[m])


def gromov_series(A: Trajectory, k: int) -> np.ndarray:
    """``<Z_0, Z_n>_{Z_k}`` for ``n = k, ..., len(A) - 1`` (clamped at 0)."""
    if not 0 <= k < len(A):
        raise WalkError("k out of range")
    if A.w is None:
        raise WalkError("trajectory was simulated without keep_path")
    if A.ctx.kind == "fuchsian":
        out = np.empty((1, len(A) - k))
        K.distances_from(A.steps[None], A.w[None], k, *A.ctx.ball_arrays[:4], out)
        dk = out[0]
    else:
        L = A.ctx.lattice
        pos = L.vector(A.g[k:]) + A.w[k:]
        dk = np.linalg.norm(pos - pos[0], axis=1)
    gp = 0.5 * (A.dists[k] + dk - A.dists[k:])
    return np.maximum(gp, 0.0)


def gromov_at(ens: Ensemble, k: int, n: int) -> np.ndarray:
    """``<Z_0, Z_n>_{Z_k}`` across an ensemble, for ``k <= n``."""
    dk = ens.pair_distances(k, n)[:, -1]
    return np.maximum(0.5 * (ens.dists[:, k] + dk - ens.dists[:, n]), 0.0)


def coupled_pair(ctx, n: int, m: int, seed: int):
    """``(A, B)`` with A of length ``n + m`` from shift 0 and B of length ``m`` from shift ``n``."""
    A = simulate(ctx, n + m, seed, 0)
    B = simulate(ctx, m, seed, n)
    return A, B


def coupling_gaps(ctx, n: int, m_max: int, seeds) -> np.ndarray:
    """``|d(Z_n, Z_{n+m}) - d(o, Z_m o T^n)|`` for m = 0..m_max, one row per seed."""
    seeds = np.asarray(seeds, dtype=np.uint64)
    A = simulate_seeds(ctx, n + m_max, seeds, 0, tolerate_ties=False)
    B = simulate_seeds(ctx, m_max, seeds, n, tolerate_ties=False)
    return np.abs(A.pair_distances(n) - B.dists)


def subadditivity_slack(ctx, n: int, m_max: int, seeds) -> np.ndarray:
    """``f_n + f_m o T^n + 2 R_dom - f_{n+m}`` for m = 0..m_max (must be >= 0)."""
    seeds = np.asarray(seeds, dtype=np.uint64)
    A = simulate_seeds(ctx, n + m_max, seeds, 0, keep_path=False, tolerate_ties=False)
    B = simulate_seeds(ctx, m_max, seeds, n, keep_path=False, tolerate_ties=False)
    return A.dists[:, n : n + 1] + B.dists + 2.0 * ctx.R_dom - A.dists[:, n:]


def step_lengths(ens: Ensemble) -> np.ndarray:
    """``d(Z_n, Z_{n+1})`` for every trajectory and step."""
    ens._need_path()
    if ens.ctx.kind == "fuchsian":
        a, b, c, d = (arr[ens.steps] for arr in ens.ctx.ball_arrays[:4])
        # d(w_n, gamma x) with gamma the local step
        gx = (a * ens.w[:, 1:] + b) / (c * ens.w[:, 1:] + d)
        return ens.ctx.dist(ens.w[:, :-1], gx)
    L = ens.ctx.lattice
    pos = L.vector(ens.g) + ens.w
    return np.linalg.norm(np.diff(pos, axis=1), axis=-1)
