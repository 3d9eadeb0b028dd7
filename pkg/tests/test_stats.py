import math

import numpy as np
import pytest

from dirichlet_walk import _kernels as K
from dirichlet_walk.stats import (
    DegenerateFitError,
    StatsError,
    angle_oscillation,
    deviation_values,
    diffusive_envelope,
    escape_rate,
    fit_line,
    fit_power_law,
    iid_sum_distances,
    linear_progress_tail,
    log_linear_fit,
    progress_probabilities,
    recurrence_stat,
    tail_fit,
    tail_probability,
    two_sample_ks,
    variance_profile,
)
from dirichlet_walk.walk import simulate_ensemble


def test_zero_ensemble():
    est = escape_rate(np.zeros((200, 65)))
    assert (est.ell_hat, est.ci_low, est.ci_high) == (0.0, 0.0, 0.0)
    _, rep = variance_profile(np.zeros((1000, 10)))
    assert rep.degenerate and math.isnan(rep.p_value)


def test_escape_rate_preconditions():
    with pytest.raises(StatsError):
        escape_rate(np.zeros((99, 65)))
    with pytest.raises(StatsError):
        escape_rate(np.zeros((100, 63)))


def test_escape_rate_ci_on_synthetic_linear():
    rng = np.random.default_rng(0)
    D = np.arange(101)[None, :] * rng.normal(0.5, 0.05, size=(500, 1))
    est = escape_rate(D)
    assert est.ci_low <= est.ell_hat <= est.ci_high
    assert est.ci_low < 0.5 < est.ci_high
    assert est.profile_n[-1] == 100


def test_iid_unit_variance(z1):
    ens = simulate_ensemble(z1, 64, 10**4, 3)
    signed = (z1.lattice.vector(ens.g) + ens.w)[..., 0]
    assert np.var(signed[:, -1]) / 64 == pytest.approx(1 / 12, rel=0.05)
    direct = iid_sum_distances(z1.lattice, 64, 10**4, 4)
    assert np.mean(direct**2) / 64 == pytest.approx(1 / 12, rel=0.05)


def test_variance_profile_gaussian_sample():
    rng = np.random.default_rng(1)
    D = np.abs(np.cumsum(rng.normal(1.0, 1.0, size=(2000, 40)), axis=1))
    D = np.hstack([np.zeros((2000, 1)), D])
    prof, rep = variance_profile(D, n_mc_samples=199)
    assert prof[-1] == pytest.approx(1.0, rel=0.1)
    assert rep.p_value > 0.01


def test_diffusive_envelope_on_torus(z2):
    out = diffusive_envelope(simulate_ensemble(z2, 128, 500, 2, keep_path=False))
    assert out["inside"]


def test_progress_epsilon_zero(g2):
    ens = simulate_ensemble(g2, 48, 300, 5, keep_path=False)
    p = progress_probabilities(ens, 0.0, np.arange(1, 49))
    assert np.all(p == 0)
    with pytest.raises(DegenerateFitError):
        linear_progress_tail(ens, 0.0)
    with pytest.raises(StatsError):
        linear_progress_tail(ens, 10.0)


def test_log_linear_fit_exact():
    x = np.arange(10)
    counts = np.round(1e6 * np.exp(-0.3 * x)).astype(int)
    fit = log_linear_fit(x, counts, 10**6)
    assert fit.slope == pytest.approx(-0.3, abs=1e-4)
    assert fit.r_squared > 0.9999


def test_tail_monotone_and_at_zero():
    v = np.random.default_rng(2).exponential(1.0, 10**5)
    assert tail_probability(v, 0.0) == 1.0
    assert tail_probability(v, 2.0) < tail_probability(v, 0.5)
    fit = tail_fit(v, 0.25)
    assert fit.slope == pytest.approx(-1.0, abs=0.05)
    assert np.all(np.diff(fit.log_p) <= 0)


def test_deviation_tail_monotone(g2):
    ens = simulate_ensemble(g2, 64, 300, 6)
    v = deviation_values(ens)
    assert len(v) == 900 and v.min() >= 0
    assert tail_probability(v, 0) == 1.0
    assert tail_probability(v, 2 * g2.R_dom) < tail_probability(v, g2.R_dom / 2)


def test_deviation_needs_genus2(z2):
    with pytest.raises(StatsError):
        deviation_values(simulate_ensemble(z2, 8, 10, 1))


def test_geodesic_ray_has_constant_angle():
    assert np.all(angle_oscillation(np.full((3, 200), 0.7), 64) == 0)
    for a, b in [(1.0, 5.0), (10.0, 300.0), (0.1, 0.2)]:
        assert K.visual_angle(a, b, b - a) == pytest.approx(0.0, abs=1e-6)
    # opposite directions
    assert K.visual_angle(2.0, 3.0, 5.0) == pytest.approx(math.pi, abs=1e-6)


def test_visual_angle_matches_law_of_cosines():
    a, b, t = 1.3, 2.1, 0.9
    c = math.acosh(math.cosh(a) * math.cosh(b) - math.sinh(a) * math.sinh(b) * math.cos(t))
    assert K.visual_angle(a, b, c) == pytest.approx(t, rel=1e-9)


def test_recurrence_single_step(z2):
    ens = simulate_ensemble(z2, 5, 3000, 7, keep_path=False)
    p, _ = recurrence_stat(ens, 0.4, 1)
    assert p == np.mean(ens.dists[:, 1] <= 0.4)
    with pytest.raises(StatsError):
        recurrence_stat(ens, 0.4, 0)
    with pytest.raises(StatsError):
        recurrence_stat(ens, 1.0, 3, exit_radius=0.5)


def test_recurrence_needs_lattice(g2):
    with pytest.raises(StatsError):
        recurrence_stat(simulate_ensemble(g2, 4, 5, 1), 1.0, 2)


def test_ks_examples():
    a = np.linspace(0, 1, 500)
    assert two_sample_ks(a, a) == (0.0, 1.0)
    s, p = two_sample_ks(np.zeros(200), np.ones(200))
    assert s == 1.0 and p < 1e-10
    rng = np.random.default_rng(8)
    ok = sum(two_sample_ks(rng.normal(size=300), rng.normal(size=400))[1] > 0.01 for _ in range(100))
    assert ok >= 98
    with pytest.raises(StatsError):
        two_sample_ks(a[:99], a)


def test_fits():
    x = np.array([10.0, 20, 40, 80, 160])
    fit = fit_power_law(x, 3 * x**-0.5)
    assert fit["slope"] == pytest.approx(-0.5, abs=1e-12)
    noisy = fit_line(np.arange(6.0), np.array([1.0, 1.1, 0.9, 1.05, 0.95, 1.0]))
    assert noisy["ci"][0] < 0 < noisy["ci"][1]
    with pytest.raises(StatsError):
        fit_line([1, 2], [1, 2])
