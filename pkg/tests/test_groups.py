import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from dirichlet_walk.groups import (
    GroupError,
    boundary_count_direct,
    build_ball,
    displacement_of,
    folner_ratio,
    folner_ratios,
    genus2_presentation,
    presentation_from_name,
    sphere_profile,
)
from dirichlet_walk.hyperbolic import dist_to_base


@pytest.fixture(scope="module")
def P():
    return genus2_presentation()


def test_relator_and_generators(P):
    assert P.relator_error(P.relators[0]) < 1e-9
    disp = displacement_of(np.array(P.generators))
    assert np.allclose(disp, disp[0], atol=1e-12)
    assert disp[0] == pytest.approx(2 * math.acosh(1 + math.sqrt(2)), abs=1e-12)
    for i, j in enumerate(P.inverse):
        assert np.allclose(P.generators[i] @ P.generators[j], np.eye(2), atol=1e-12)


def test_z2_ball_size():
    # integer vectors of norm <= 2
    brute = sum(1 for x in range(-2, 3) for y in range(-2, 3) if x * x + y * y <= 4)
    assert brute == 13
    assert len(build_ball(presentation_from_name("z2"), 2.0)) == 13


@pytest.mark.parametrize("name", ["z2", "genus2", "lattice:1,0;0.5,1"])
def test_radius_zero_is_identity(name):
    B = build_ball(presentation_from_name(name), 0.0)
    assert len(B) == 1 and B.words[0] == ()


def test_ball_inverse_closure_and_coherence(P):
    B = build_ball(P, 9.0)
    assert np.all(B.index_of_inverse() >= 0)
    assert B.min_gap > 1e-3
    for k in range(0, len(B), max(1, len(B) // 300)):
        e = B.element(k)
        g = P.evaluate(e.word)
        assert np.allclose(g.matrix(), B.mats[k], atol=1e-9 * np.abs(B.mats[k]).max())
        assert dist_to_base(g) == pytest.approx(e.displacement, abs=1e-9)
    assert np.all(np.diff(B.disp) >= 0)


def test_ball_monotone(P):
    small, big = build_ball(P, 7.0), build_ball(P, 9.0)
    from scipy.spatial import cKDTree

    from dirichlet_walk.groups import hyperboloid

    d, _ = cKDTree(hyperboloid(big.mats)).query(hyperboloid(small.mats))
    assert np.all(d < 1e-6)


def test_ball_matches_word_enumeration(P):
    """Every element of word length <= 3 with displacement <= r is in the ball."""
    r = 8.0
    B = build_ball(P, r)
    from scipy.spatial import cKDTree

    from dirichlet_walk.groups import _word_ball_points, hyperboloid

    words = _word_ball_points(P, 3)
    words = words[displacement_of(words) <= r - 1e-9]
    d, _ = cKDTree(hyperboloid(B.mats)).query(hyperboloid(words))
    assert np.all(d < 1e-6)


def test_cost_guard(P):
    with pytest.raises(GroupError):
        build_ball(P, 13.0)


def test_sphere_sizes_match_growth_series(P):
    """Growth series of the genus-2 surface group in the standard generators."""
    x = sp.symbols("x")
    series = sp.series((1 + 2 * x + 2 * x**2 + 2 * x**3 + x**4) / (1 - 6 * x - 6 * x**2 - 6 * x**3 + x**4), x, 0, 8)
    expected = [int(series.removeO().coeff(x, k)) for k in range(8)]
    sizes, _ = sphere_profile(P, 7)
    assert sizes.tolist() == expected


def test_folner_z2_exact():
    Z2 = presentation_from_name("z2")
    assert folner_ratio(Z2, 0) == Fraction(4, 1)
    for n in (1, 3, 10, 50):
        assert folner_ratio(Z2, n) == Fraction(8 * n + 4, 2 * n * n + 2 * n + 1)
    assert folner_ratio(Z2, 50) < folner_ratio(Z2, 10)


def test_folner_z3_against_direct_count():
    Z3 = presentation_from_name("z3")
    for n in (1, 2, 4):
        sizes, _ = sphere_profile(Z3, n)
        assert folner_ratio(Z3, n) == Fraction(boundary_count_direct(Z3, n), int(sizes.sum()))


def test_folner_genus2_direct_and_positive(P):
    for n in (1, 2, 3, 4):
        sizes, _ = sphere_profile(P, n)
        assert folner_ratio(P, n) == Fraction(boundary_count_direct(P, n), int(sizes.sum()))
    ratios = folner_ratios(P, [4, 5, 6])
    assert min(ratios) > 5


def test_presentation_names():
    assert presentation_from_name("z3").lattice.dim == 3
    assert presentation_from_name("lattice:2").name == "lattice:2"
    L = presentation_from_name("lattice:1,0;0.5,1").lattice
    assert np.allclose(L.basis, [[1, 0.5], [0, 1]])
    with pytest.raises(GroupError):
        presentation_from_name("torus")
