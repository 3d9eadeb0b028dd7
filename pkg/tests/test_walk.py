import csv
import io
import math

import numpy as np
import pytest
from scipy import integrate, stats

from dirichlet_walk.dirichlet import DomainError
from dirichlet_walk.hyperbolic import dist, to_disk
from dirichlet_walk.stats import iid_sum_distances, markov_witness, two_sample_ks
from dirichlet_walk.streams import IncrementStream, trajectory_seeds
from dirichlet_walk.walk import (
    CSV_COLUMNS,
    CSV_SCHEMA,
    MAX_STEPS,
    WalkError,
    coupled_pair,
    coupling_gaps,
    defect,
    draw_increment,
    gromov_at,
    gromov_series,
    initial_state,
    simulate,
    simulate_ensemble,
    simulate_seeds,
    step,
    step_lengths,
    subadditivity_slack,
)


@pytest.fixture(scope="module")
def octagon(g2):
    """Boundary radius r(theta) of D(o), from the inradius and the side directions."""
    rho = math.acosh(1 + math.sqrt(2))
    dirs = np.angle(to_disk(g2.ball.centers[1:9]))

    def r_of(theta):
        c = np.cos(theta - dirs)
        c = c[c > 1e-12]
        return float(np.min(np.arctanh(np.minimum(math.tanh(rho) / c, 1 - 1e-16))))

    r_of.breaks = np.sort(np.concatenate([dirs, dirs + math.pi / 8]) % (2 * math.pi))
    return r_of


def test_octagon_oracle_area(octagon):
    area, _ = integrate.quad(lambda th: math.cosh(octagon(th)) - 1, 0, 2 * math.pi, limit=200, points=np.linspace(0, 2 * math.pi, 17)[1:-1])
    assert area == pytest.approx(4 * math.pi, rel=1e-9)


def test_increment_radial_law(g2, octagon):
    xs = g2.draw_increments(np.arange(2 * 10**6) // 2, np.arange(2 * 10**6) % 2 + 1)
    r = dist(xs, 1j)
    pts = octagon.breaks
    mean, _ = integrate.quad(lambda th: (lambda R: R * math.cosh(R) - math.sinh(R))(octagon(th)), 0, 2 * math.pi, limit=200, points=pts)
    mean /= 4 * math.pi
    assert abs(r.mean() - mean) < 4 * r.std() / math.sqrt(len(r))

    theta = np.linspace(0, 2 * math.pi, 200001)
    r_theta = np.array([octagon(th) for th in theta])

    def cdf(t):
        # piecewise-smooth integrand with kinks where r(theta) = t; a fine grid is ample for KS
        return np.trapezoid(np.cosh(np.minimum(t, r_theta)) - 1, theta) / (4 * math.pi)

    grid = np.linspace(0, g2.R_dom, 60)
    table = np.array([cdf(t) for t in grid])
    assert stats.kstest(r[:10**5], lambda t: np.interp(t, grid, table)).pvalue > 0.001


def test_increments_in_domain(g2, z3):
    assert g2.member_o(g2.draw_increments(np.arange(5000), 7)).all()
    assert z3.member_o(z3.draw_increments(np.arange(5000), 7)).all()


def test_torus_increment_law(z2):
    s = np.arange(10**5)
    x = z2.draw_increments(s, 1)
    for j in range(2):
        assert stats.kstest(x[:, j], stats.uniform(-0.5, 1).cdf).pvalue > 0.001


@pytest.mark.parametrize("name", ["genus2", "lattice:2", "lattice:1,0.5;0,0.8660254037844386"])
def test_determinism(name):
    a = simulate(name, 60, 17)
    b = simulate(name, 60, 17)
    assert np.array_equal(a.dists, b.dists)
    assert a.to_csv() == b.to_csv()
    assert not np.array_equal(a.dists, simulate(name, 60, 18).dists)


def test_first_step_is_local(g2):
    ens = simulate_ensemble(g2, 1, 500, 3)
    assert np.all(ens.steps[:, 0] == 0)
    assert np.allclose(ens.dists[:, 1], dist(ens.w[:, 1], 1j))


def test_ensemble_is_batch_independent(g2):
    seeds = trajectory_seeds(5, 40)
    full = simulate_seeds(g2, 30, seeds)
    part = simulate_seeds(g2, 30, seeds[10:20])
    threaded = simulate_seeds(g2, 30, seeds, workers=3)
    assert np.array_equal(full.dists[10:20], part.dists)
    assert np.array_equal(full.dists, threaded.dists)


def test_single_step_api_matches_ensemble(g2, z2):
    for ctx in (g2, z2):
        tr = simulate(ctx, 12, 99)
        stream = IncrementStream(99)
        st = initial_state(ctx)
        for k in range(1, 13):
            st = step(ctx, st, draw_increment(ctx, stream, k))
            assert st.dist_to_origin(ctx) == pytest.approx(tr.dists[k], abs=1e-9)
        assert len(tr.states) == 13


def test_step_rejects_foreign_increment(g2):
    with pytest.raises(DomainError):
        step(g2, initial_state(g2), 20j)


def test_step_length_bound(g2, z3):
    for ctx in (g2, z3):
        ens = simulate_ensemble(ctx, 50, 200, 8)
        assert step_lengths(ens).max() <= 2 * ctx.R_dom
        assert ens.excluded == 0


def test_pair_distance_consistency(g2):
    tr = simulate(g2, 80, 4)
    assert tr.pair_distance(0, 80) == pytest.approx(tr.dists[80], abs=1e-9)
    assert tr.pair_distance(30, 10) == tr.pair_distance(10, 30)
    states = tr.states
    z10, z30 = states[10].position(g2), states[30].position(g2)
    assert tr.pair_distance(10, 30) == pytest.approx(float(dist(z10, z30)), rel=1e-8)


@pytest.mark.parametrize("name", ["genus2", "lattice:3"])
def test_coupling(name):
    from dirichlet_walk.dirichlet import context_from_name

    ctx = context_from_name(name)
    gaps = coupling_gaps(ctx, 25, 40, trajectory_seeds(1, 30))
    assert gaps[:, 0].max() == 0.0
    assert gaps.max() <= 2 * ctx.R_dom
    assert gaps.max() > 1e-6  # the shifted walk starts at o, not at Z_n


def test_defect_edges(g2):
    A, B = coupled_pair(g2, 10, 15, 3)
    assert defect(A, B, 10, 0) == 0.0
    assert defect(A, B, 10, 15) <= 2 * g2.R_dom
    C = simulate(g2, 15, 4, 10)
    with pytest.raises(WalkError):
        defect(A, C, 10, 5)
    with pytest.raises(WalkError):
        defect(A, B, 9, 5)
    with pytest.raises(WalkError):
        defect(A, B, 10, 16)


def test_gromov_series_edges(g2, z2):
    for ctx in (g2, z2):
        tr = simulate(ctx, 40, 6)
        assert np.all(gromov_series(tr, 0) == 0)
        gs = gromov_series(tr, 12)
        assert gs[0] == 0 and len(gs) == 29
        assert np.all(gs <= tr.dists[12] + 1e-9)
        with pytest.raises(WalkError):
            gromov_series(tr, 41)
    ens = simulate_ensemble(g2, 40, 5, 6)
    assert np.allclose(gromov_at(ens, 12, 40), [gromov_series(ens.trajectory(t), 12)[-1] for t in range(5)])


@pytest.mark.parametrize("name", ["genus2", "lattice:2"])
def test_subadditivity(name):
    from dirichlet_walk.dirichlet import context_from_name

    slack = subadditivity_slack(context_from_name(name), 20, 60, trajectory_seeds(2, 200))
    assert slack.min() >= -1e-9


def test_markov_witness(g2):
    _, p = markov_witness(simulate_ensemble(g2, 20, 2000, 12))
    assert p > 0.001


def test_torus_walk_equals_iid_sums(z2):
    ens = simulate_ensemble(z2, 40, 4000, 21, keep_path=False)
    _, p = two_sample_ks(ens.dists[:, 40], iid_sum_distances(z2.lattice, 40, 4000, 22))
    assert p > 0.001


def test_word_lengths(g2, z2):
    tr = simulate(z2, 30, 1)
    assert np.array_equal(tr.word_lengths(), np.abs(tr.g).sum(1))
    h = simulate(g2, 30, 1).word_lengths()
    assert h[0] == 0 and np.all(np.abs(np.diff(h)) <= max(len(w) for w in g2.ball.words))


def test_csv_schema(g2):
    text = simulate(g2, 25, 8).to_csv()
    first, rest = text.split("\n", 1)
    assert first.startswith(f"# {CSV_SCHEMA}") and "seed=8" in first
    rows = list(csv.reader(io.StringIO(rest)))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 27
    assert [int(r[0]) for r in rows[1:]] == list(range(26))
    assert float(rows[1][1]) == 0.0


def test_guards(g2):
    with pytest.raises(WalkError):
        simulate(g2, MAX_STEPS + 1, 1)
    with pytest.raises(WalkError):
        simulate(g2, -1, 1)
    with pytest.raises(WalkError):
        simulate(g2, 5, 1, shift=-2)
    ens = simulate_ensemble(g2, 5, 3, 1, keep_path=False)
    with pytest.raises(WalkError):
        ens.pair_distances(0)
    assert simulate(g2, 0, 1).dists.tolist() == [0.0]
