import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from dirichlet_walk.groups import build_ball, genus2_presentation
from dirichlet_walk.hyperbolic import (
    GeometryError,
    HPoint,
    ScaledIsometry,
    apply,
    boundary_angle,
    dist,
    dist_to_base,
    gromov_product,
    polar_point,
    sample_hyperbolic_disk,
)
from dirichlet_walk.streams import IncrementStream

mp.mp.dps = 60


def mp_dist(p, q):
    p, q = complex(p), complex(q)
    num = (mp.mpf(p.real) - mp.mpf(q.real)) ** 2 + (mp.mpf(p.imag) - mp.mpf(q.imag)) ** 2
    return mp.acosh(1 + num / (2 * mp.mpf(p.imag) * mp.mpf(q.imag)))


def random_points(rng, n, spread=3.0):
    return rng.normal(0, spread, n) + 1j * np.exp(rng.normal(0, spread, n))


@pytest.fixture(scope="module")
def ball10():
    return build_ball(genus2_presentation(), 10.0)


def test_hpoint_validation():
    HPoint(0.0, 1.0)
    for bad in [(0.0, 0.0), (0.0, -1.0), (math.inf, 1.0), (0.0, math.nan), (0.0, 1e-320)]:
        with pytest.raises(GeometryError):
            HPoint(*bad)


def test_dist_examples():
    assert dist(1j, 1j) == 0.0
    assert dist(1j, 4j) == pytest.approx(math.log(4), abs=1e-12)
    assert dist(HPoint(0, 1), HPoint(0, 4)) == pytest.approx(1.386294, abs=1e-6)


def test_dist_against_arcosh_oracle():
    rng = np.random.default_rng(1)
    p, q = random_points(rng, 300), random_points(rng, 300)
    got = dist(p, q)
    for a, b, g in zip(p, q, got):
        ref = float(mp_dist(a, b))
        assert abs(g - ref) <= 1e-12 * max(1.0, ref) + 1e-13


def test_dist_symmetric_bitwise():
    rng = np.random.default_rng(2)
    p, q = random_points(rng, 1000), random_points(rng, 1000)
    assert np.array_equal(dist(p, q), dist(q, p))


def test_dist_overflow_error():
    with pytest.raises(GeometryError, match="numeric overflow in distance"):
        dist(1e308 + 1j, -1e308 + 1e-300j)


def test_triangle_inequality():
    rng = np.random.default_rng(3)
    p, q, r = (random_points(rng, 10**4) for _ in range(3))
    assert np.all(dist(p, r) <= dist(p, q) + dist(q, r) + 1e-9)


def test_apply_examples():
    p = HPoint(0.3, 2.0)
    assert apply(ScaledIsometry.identity(), p) == p
    assert apply(ScaledIsometry([[1, 1], [0, 1]]), 1j) == pytest.approx(1 + 1j)


def test_apply_inverse_round_trip(ball10):
    rng = np.random.default_rng(4)
    idx = rng.integers(0, len(ball10), 500)
    pts = random_points(rng, 500, 1.0)
    for k, z in zip(idx, pts):
        g = ScaledIsometry(ball10.mats[k])
        assert abs(apply(g.inverse(), apply(g, z)) - z) <= 1e-10 * max(1.0, abs(z))


def test_apply_rejects_orientation_reversal():
    with pytest.raises(GeometryError, match="orientation/overflow failure"):
        apply(ScaledIsometry([[1.0, 0.0], [0.0, -1.0]], normalize=False), 1j)


def test_dist_to_base_examples():
    assert dist_to_base(ScaledIsometry.identity()) == 0.0
    g = ScaledIsometry([[2.0, 0.0], [0.0, 0.5]])
    assert dist_to_base(g) == pytest.approx(math.acosh(17 / 8), abs=1e-12)
    assert dist_to_base(g) == pytest.approx(2 * math.log(2), abs=1e-12)
    assert dist_to_base(g) == pytest.approx(dist(1j, apply(g, 1j)), abs=1e-12)


def test_dist_to_base_matches_direct_formula(ball10):
    P = genus2_presentation()
    rng = np.random.default_rng(5)
    for _ in range(200):
        word = rng.integers(0, 8, rng.integers(1, 60))
        g = P.evaluate(word)
        direct = dist(1j, apply(g, 1j))
        if direct < 500:
            assert dist_to_base(g) == pytest.approx(direct, abs=1e-9 * max(1, direct))


def test_long_products_against_high_precision():
    """Products of ~600 generators (distances far beyond cosh overflow)."""
    P = genus2_presentation()
    rng = np.random.default_rng(6)
    gens_mp = [mp.matrix([[mp.mpf(x) for x in row] for row in g]) for g in P.generators]
    for _ in range(5):
        word = rng.integers(0, 8, 600)
        g = P.evaluate(word)
        G = mp.eye(2)
        for i in word:
            G = G * gens_mp[int(i)]
        fro2 = sum(G[i, j] ** 2 for i in range(2) for j in range(2))
        ref = float(mp.acosh(fro2 / 2))
        assert ref > 710  # beyond double-precision cosh
        assert dist_to_base(g) == pytest.approx(ref, rel=1e-9)


def exact_det(g):
    m = [[mp.mpf(float(x)) for x in row] for row in g.m]
    return mp.ldexp(m[0][0] * m[1][1] - m[0][1] * m[1][0], 2 * g.exponent)


def test_determinant_and_norm_invariants(ball10):
    # the determinant of the represented float matrix, evaluated exactly;
    # checked where entries stay below 2**10 (beyond that a float matrix
    # cannot have determinant 1 to 1e-9, see the decisions ledger)
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(300):
        a, b = (ScaledIsometry(ball10.mats[k]) for k in rng.integers(0, len(ball10), 2))
        c = a @ b
        assert 1.0 <= np.linalg.norm(c.m) < 2.0
        if c.exponent <= 10:
            checked += 1
            assert abs(exact_det(c) - 1) <= 1e-9
    assert checked > 50


def test_composition_associative(ball10):
    rng = np.random.default_rng(8)
    for _ in range(300):
        a, b, c = (ScaledIsometry(ball10.mats[k]) for k in rng.integers(0, len(ball10), 3))
        left, right = (a @ b) @ c, a @ (b @ c)
        # relative to the scale of the factors, which bounds the rounding
        scale = np.linalg.norm(a.matrix()) * np.linalg.norm(b.matrix()) * np.linalg.norm(c.matrix())
        assert np.abs(left.matrix() - right.matrix()).max() <= 1e-12 * scale


def test_isometry_invariance():
    ball = build_ball(genus2_presentation(), 12.0)
    rng = np.random.default_rng(9)
    idx = rng.integers(0, len(ball), 2000)
    p, q = random_points(rng, 2000, 1.0), random_points(rng, 2000, 1.0)
    for k, a, b in zip(idx, p, q):
        g = ScaledIsometry(ball.mats[k])
        d0 = dist(a, b)
        assert abs(dist(apply(g, a), apply(g, b)) - d0) <= 1e-9 * (1 + d0)


def test_gromov_product_examples():
    x = 2 + 3j
    assert gromov_product(x, 1j, 1j) == 0.0
    assert gromov_product(x, x, 1j) == pytest.approx(dist(x, 1j))
    assert gromov_product(4j, 0.25j, 1j) == pytest.approx(0.0, abs=1e-12)


def test_delta_hyperbolicity_witness():
    rng = np.random.default_rng(10)
    x, y, z = (random_points(rng, 10**4) for _ in range(3))
    o = 1j
    lhs = gromov_product(x, y, o)
    rhs = np.minimum(gromov_product(x, z, o), gromov_product(z, y, o))
    assert np.all(lhs >= rhs - (math.log(3) + 1e-6))


@given(st.floats(0.0, 30.0), st.floats(0.0, 2 * math.pi))
@settings(max_examples=200, deadline=None)
def test_polar_point_distance(r, theta):
    z = polar_point(r, theta)
    if r < 25:
        assert dist(1j, z) == pytest.approx(r, abs=1e-8 * max(1, r))


def test_boundary_angle_constant_along_ray():
    angles = []
    for r in np.linspace(0.5, 30, 40):
        z = complex(polar_point(r, 0.7))
        angles.append(boundary_angle(ScaledIsometry.translator(z)))
    assert np.ptp(angles) < 1e-9
    assert angles[0] == pytest.approx(0.7)


def test_sample_disk_support_and_law():
    s = IncrementStream(11)
    R = 2.5
    c = 0.7 + 1.3j
    pts = sample_hyperbolic_disk(c, R, s, np.arange(10**5))
    r = dist(c, pts)
    assert np.all(r <= R + 1e-12)
    cdf = lambda t: (np.cosh(t) - 1) / (np.cosh(R) - 1)
    assert stats.kstest(r, cdf).pvalue > 0.01


def test_sample_disk_determinism_and_range():
    a = sample_hyperbolic_disk(1j, 1.0, IncrementStream(5), np.arange(50))
    b = sample_hyperbolic_disk(1j, 1.0, IncrementStream(5), np.arange(50))
    assert np.array_equal(a, b)
    with pytest.raises(GeometryError):
        sample_hyperbolic_disk(1j, 21.0, IncrementStream(5))
