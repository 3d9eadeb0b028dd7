"""Estimators and tests on trajectory ensembles.

Everything here is a deterministic function of its inputs: resampling uses a
fixed seed, and variances rely on numpy's pairwise summation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats as sps

from .walk import Ensemble, gromov_at, simulate_ensemble

NORMALITY_ALPHA = 0.01
RERUN_WINDOW = (0.001, 0.01)
MIN_BIN_EVENTS = 30
BOOTSTRAP_RESAMPLES = 1000
BOOTSTRAP_SEED = 20240917


class StatsError(ValueError):
    pass


class DegenerateFitError(StatsError):
    """Too few resolvable bins for a tail fit."""


@dataclass
class EscapeEstimate:
    ell_hat: float
    ci_low: float
    ci_high: float
    n_used: int
    trajectories_used: int
    profile_n: list = field(default_factory=list)
    profile_mean_over_n: list = field(default_factory=list)

    def as_dict(self):
        return asdict(self)


@dataclass
class TailFit:
    slope: float
    intercept: float
    r_squared: float
    support_range: tuple
    slope_stderr: float = float("nan")
    x: list = field(default_factory=list)
    log_p: list = field(default_factory=list)
    counts: list = field(default_factory=list)

    def as_dict(self):
        return asdict(self)


@dataclass
class CltReport:
    n: int
    sigma2_hat: float
    normality_stat: float
    p_value: float
    standardized_sample_size: int
    ell_hat: float = float("nan")
    alpha: float = NORMALITY_ALPHA
    relative_change_last_doubling: float = float("nan")
    reruns: int = 0
    degenerate: bool = False

    def as_dict(self):
        return asdict(self)


def _dists(ens):
    return ens.dists if isinstance(ens, Ensemble) else np.atleast_2d(np.asarray(ens, dtype=float))


# -- escape rate ----------------------------------------------------------


def escape_rate(ens, n: int | None = None, n_resamples: int = BOOTSTRAP_RESAMPLES, seed: int = BOOTSTRAP_SEED) -> EscapeEstimate:
    """Mean of ``d(o, Z_N) / N`` with a percentile-bootstrap 95% interval."""
    D = _dists(ens)
    T, L = D.shape
    n = L - 1 if n is None else int(n)
    if T < 100 or n < 64 or n > L - 1:
        raise StatsError("need at least 100 trajectories of at least 64 steps")
    x = D[:, n] / n
    ell = float(np.mean(x))
    if np.ptp(x) == 0:
        lo = hi = ell
    else:
        res = sps.bootstrap(
            (x,), np.mean, n_resamples=n_resamples, confidence_level=0.95, method="percentile", rng=np.random.default_rng(seed)
        )
        lo, hi = float(res.confidence_interval.low), float(res.confidence_interval.high)
    grid = sorted({k for k in (2**j for j in range(3, 21)) if k <= n} | {n})
    return EscapeEstimate(
        ell,
        min(lo, ell),
        max(hi, ell),
        n,
        T,
        grid,
        [float(np.mean(D[:, k]) / k) for k in grid],
    )


def diffusive_envelope(ens, n: int | None = None) -> dict:
    """Compare ``E d(o, Z_N)`` with ``3 sqrt(N E d(o, Z_1)^2)``.

    An IID zero-mean sum satisfies ``E|S_N| <= sqrt(N E|Y|^2)``, so a walk
    without linear escape stays well inside the envelope.
    """
    D = _dists(ens)
    n = D.shape[1] - 1 if n is None else int(n)
    mean = float(np.mean(D[:, n]))
    env = 3.0 * math.sqrt(n * float(np.mean(D[:, 1] ** 2)))
    return {"n": n, "mean_dist": mean, "envelope": env, "inside": mean <= env}


# -- variance and CLT -----------------------------------------------------


def variance_profile(ens, n_mc_samples: int = 999, seed: int = BOOTSTRAP_SEED):
    """``V(f_n) / n`` for n >= 1 and a normality report at the final n.

    The standardized sample ``(f_n - l n) / sqrt(n)`` is tested against a
    normal law with an Anderson-Darling statistic. Both location and scale
    are estimated from the sample (``l`` is itself an estimate), and the null
    distribution is obtained by parametric Monte Carlo.
    """
    D = _dists(ens)
    T, L = D.shape
    if T < 1000:
        raise StatsError("need at least 1000 trajectories")
    n = L - 1
    steps = np.arange(1, L)
    profile = np.var(D[:, 1:], axis=0) / steps
    ell = float(np.mean(D[:, n]) / n)
    z = (D[:, n] - ell * n) / math.sqrt(n)
    half = n // 2
    rel = float(abs(profile[n - 1] - profile[half - 1]) / profile[n - 1]) if half >= 1 and profile[n - 1] > 0 else float("nan")
    sigma2 = float(profile[n - 1])
    if not np.ptp(z) > 0:
        return profile, CltReport(n, sigma2, float("nan"), float("nan"), T, ell, relative_change_last_doubling=rel, degenerate=True)
    res = sps.goodness_of_fit(sps.norm, z, statistic="ad", n_mc_samples=n_mc_samples, rng=np.random.default_rng(seed))
    return profile, CltReport(n, sigma2, float(res.statistic), float(res.pvalue), T, ell, relative_change_last_doubling=rel)


def clt_check(ctx, n: int, n_trajectories: int, seed: int, alpha: float = NORMALITY_ALPHA) -> CltReport:
    """Run the CLT test, repeating once with 4x trajectories if the p-value is borderline."""
    _, rep = variance_profile(simulate_ensemble(ctx, n, n_trajectories, seed, keep_path=False))
    if RERUN_WINDOW[0] <= rep.p_value < RERUN_WINDOW[1]:
        _, rep = variance_profile(simulate_ensemble(ctx, n, 4 * n_trajectories, seed, keep_path=False))
        rep.reruns = 1
    rep.alpha = alpha
    return rep


# -- tail fits ------------------------------------------------------------


def log_linear_fit(x, counts, totals) -> TailFit:
    """Least-squares line through ``log(counts / totals)`` on bins with >= 30 events."""
    x = np.asarray(x, dtype=float)
    counts = np.asarray(counts)
    totals = np.broadcast_to(np.asarray(totals), counts.shape)
    use = counts >= MIN_BIN_EVENTS
    if use.sum() < 3:
        raise DegenerateFitError("fewer than three bins with enough events; adjust the range")
    xs = x[use]
    lp = np.log(counts[use] / totals[use])
    if np.ptp(lp) == 0:
        slope, icpt, r2, se = 0.0, float(lp[0]), 1.0, 0.0
    else:
        fit = sps.linregress(xs, lp)
        slope, icpt, r2, se = float(fit.slope), float(fit.intercept), float(fit.rvalue**2), float(fit.stderr)
    return TailFit(slope, icpt, min(max(r2, 0.0), 1.0), (float(xs.min()), float(xs.max())), se, xs.tolist(), lp.tolist(), counts[use].tolist())


def progress_probabilities(ens, epsilon: float, ms) -> np.ndarray:
    """Empirical ``P(d(o, Z_m) <= epsilon m)`` for each m."""
    D = _dists(ens)
    ms = np.asarray(ms, dtype=int)
    return np.mean(D[:, ms] <= epsilon * ms, axis=0)


def linear_progress_tail(ens, epsilon: float, m_range=(8, 48)) -> TailFit:
    """Log-linear fit of ``P(d(o, Z_m) <= epsilon m)`` against m."""
    D = _dists(ens)
    if isinstance(ens, Ensemble) and ens.ctx.kind == "fuchsian":
        ell = float(np.mean(D[:, -1]) / (D.shape[1] - 1))
        if not epsilon < ell / 2:
            raise StatsError(f"epsilon must be below half the escape rate ({ell / 2:.4g})")
    ms = np.arange(m_range[0], min(m_range[1], D.shape[1] - 1) + 1)
    counts = np.sum(D[:, ms] <= epsilon * ms, axis=0)
    return log_linear_fit(ms, counts, D.shape[0])


def deviation_values(ens: Ensemble, n: int | None = None, k_fractions=(0.25, 0.5, 0.75)) -> np.ndarray:
    """Pooled ``<Z_0, Z_n>_{Z_k}`` for k = fraction * n."""
    if ens.ctx.kind != "fuchsian":
        raise StatsError("deviation tail is defined for the genus-2 instance only")
    n = ens.n_steps if n is None else int(n)
    ks = sorted({int(round(f * n)) for f in k_fractions})
    return np.concatenate([gromov_at(ens, k, n) for k in ks])


def deviation_tail(ens: Ensemble, n: int | None = None, k_fractions=(0.25, 0.5, 0.75), bin_width: float | None = None) -> TailFit:
    """Log-linear fit of the pooled tail ``P(<Z_0, Z_n>_{Z_k} >= t)`` against t."""
    vals = deviation_values(ens, n, k_fractions)
    return tail_fit(vals, bin_width or ens.ctx.R_dom / 4)


def tail_fit(values, bin_width: float) -> TailFit:
    """Fit ``log P(V >= t)`` on the grid t = 0, h, 2h, ..."""
    values = np.asarray(values, dtype=float)
    grid = np.arange(0.0, values.max() + bin_width, bin_width)
    s = np.sort(values)
    counts = len(s) - np.searchsorted(s, grid, side="left")
    return log_linear_fit(grid, counts, len(s))


def tail_probability(values, t) -> float:
    return float(np.mean(np.asarray(values) >= t))


# -- boundary convergence -------------------------------------------------


def angle_oscillation(angles, N: int) -> np.ndarray:
    """Spread of the boundary angle over steps N..2N (unwrapped), per row."""
    a = np.atleast_2d(np.asarray(angles, dtype=float))
    if a.shape[1] < 2 * N + 1:
        raise StatsError("trajectory too short for the window")
    win = np.unwrap(a[:, N : 2 * N + 1], axis=1)
    return np.ptp(win, axis=1)


def boundary_convergence(ens: Ensemble, windows=(64, 128, 256)) -> dict:
    """Angular spread over tail windows and tail minima of ``<Z_n, Z_m>_o``.

    The spread over [N, 2N] is the largest visual angle at o between two
    positions of the window. It is computed from distances in log form
    because it falls far below the resolution of the raw angle series.
    """
    from . import _kernels as K

    if ens.ctx.kind != "fuchsian" or ens.n_steps < 512:
        raise StatsError("needs genus-2 trajectories of length >= 512")
    windows = np.asarray(windows, dtype=np.int64)
    if 2 * windows.max() > ens.n_steps:
        raise StatsError("trajectory too short for the largest window")
    a, b, c, d, _ = ens.ctx.ball_arrays
    T = ens.n_trajectories
    osc = np.empty((T, len(windows)))
    gmin = np.empty((T, len(windows)))
    for t in range(T):
        for j, N in enumerate(windows):
            osc[t, j] = K.window_angle_spread(ens.steps[t], ens.w[t], ens.dists[t], int(N), a, b, c, d)
        gmin[t] = K.tail_gromov_min(ens.steps[t], ens.w[t], ens.dists[t], windows, a, b, c, d)
    nonincreasing = np.all(np.diff(osc, axis=1) <= 0, axis=1)
    med = np.median(gmin, axis=0)
    return {
        "windows": windows.tolist(),
        "median_oscillation": np.median(osc, axis=0).tolist(),
        "fraction_nonincreasing": float(np.mean(nonincreasing)),
        "median_min_gromov": med.tolist(),
        "gromov_strictly_increasing": bool(np.all(np.diff(med) > 0)),
        "oscillation": osc,
        "min_gromov": gmin,
    }


# -- tori -----------------------------------------------------------------


def recurrence_stat(ens, r: float, N: int, exit_radius: float | None = None) -> tuple[float, float]:
    """Fraction of trajectories that come within ``r`` of o during steps 1..N, with its standard error.

    With ``exit_radius`` only visits after the first exit from
    ``B(o, exit_radius)`` count. Without it the first steps (which never leave
    the cell around o) already register as returns on unit lattices.
    """
    D = _dists(ens)
    if isinstance(ens, Ensemble) and ens.ctx.kind != "lattice":
        raise StatsError("recurrence is measured on lattice instances")
    if not 1 <= N <= D.shape[1] - 1:
        raise StatsError("N out of range")
    window = D[:, 1 : N + 1]
    close = window <= r
    if exit_radius is not None:
        if exit_radius <= r:
            raise StatsError("exit radius must exceed r")
        left = np.logical_or.accumulate(window > exit_radius, axis=1)
        close &= left
    hit = close.any(axis=1)
    p = float(np.mean(hit))
    return p, math.sqrt(p * (1 - p) / len(hit))


def iid_sum_distances(lattice, n: int, count: int, seed: int) -> np.ndarray:
    """``|Y_1 + ... + Y_n|`` with Y uniform on the Voronoi cell, by direct summation.

    Uses numpy's own generator, independent of the walk's counter streams.
    """
    from .lattice import voronoi_membership

    rng = np.random.default_rng(seed)
    box = lattice.bounding_box
    total = np.zeros((count, lattice.dim))
    for _ in range(n):
        y = np.empty((count, lattice.dim))
        todo = np.arange(count)
        while todo.size:
            cand = rng.uniform(-box, box, size=(todo.size, lattice.dim))
            ok = voronoi_membership(lattice, cand)
            y[todo[ok]] = cand[ok]
            todo = todo[~ok]
        total += y
    return np.linalg.norm(total, axis=1)


def two_sample_ks(a, b) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 100 or len(b) < 100:
        raise StatsError("samples must have at least 100 points")
    res = sps.ks_2samp(a, b, method="asymp")
    return float(res.statistic), float(res.pvalue)


def markov_witness(ens: Ensemble, lag_bins: int = 4, value_bins: int = 4) -> tuple[float, float]:
    """Chi-square test that the new local point is independent of the path before Z_n.

    Rows: quantile bin of the previous step length ``d(Z_{n-1}, Z_n)``;
    columns: quantile bin of ``d(o, w_{n+1})``.
    """
    from .walk import step_lengths

    ens._need_path()
    prev = step_lengths(ens)[:, :-1].ravel()
    if ens.ctx.kind == "fuchsian":
        nxt = ens.ctx.dist(ens.w[:, 2:], 1j).ravel()
    else:
        nxt = np.linalg.norm(ens.w[:, 2:], axis=-1).ravel()
    rb = np.searchsorted(np.quantile(prev, np.linspace(0, 1, lag_bins + 1)[1:-1]), prev)
    cb = np.searchsorted(np.quantile(nxt, np.linspace(0, 1, value_bins + 1)[1:-1]), nxt)
    table = np.zeros((lag_bins, value_bins))
    np.add.at(table, (rb, cb), 1)
    chi2, p, _, _ = sps.chi2_contingency(table)
    return float(chi2), float(p)


# -- scaling fits ---------------------------------------------------------


def fit_power_law(x, y, yerr=None) -> dict:
    """Exponent of ``y ~ C x^beta`` by (weighted) least squares on logs."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    return _line(lx, ly, None if yerr is None else np.asarray(yerr) / np.asarray(y))


def fit_line(x, y) -> dict:
    return _line(np.asarray(x, dtype=float), np.asarray(y, dtype=float), None)


def _line(x, y, sigma):
    if len(x) < 3:
        raise StatsError("need at least three points")
    w = None if sigma is None else 1.0 / np.asarray(sigma) ** 2
    A = np.stack([x, np.ones_like(x)], axis=1)
    if w is None:
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        resid = y - A @ coef
        dof = len(x) - 2
        s2 = float(resid @ resid) / dof
        cov = s2 * np.linalg.inv(A.T @ A)
    else:
        Aw = A * np.sqrt(w)[:, None]
        coef, *_ = np.linalg.lstsq(Aw, y * np.sqrt(w), rcond=None)
        resid = (y - A @ coef) * np.sqrt(w)
        dof = len(x) - 2
        s2 = max(float(resid @ resid) / dof, 1.0)
        cov = s2 * np.linalg.inv(Aw.T @ Aw)
    se = math.sqrt(max(cov[0, 0], 0.0))
    q = float(sps.t.ppf(0.975, dof))
    return {"slope": float(coef[0]), "intercept": float(coef[1]), "slope_stderr": se, "ci": (float(coef[0] - q * se), float(coef[0] + q * se))}
