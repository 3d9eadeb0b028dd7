"""Dirichlet random walks on Galois covers: flat tori and the genus-2 surface."""

__version__ = "0.1.0"

from .hyperbolic import HPoint, ScaledIsometry, dist, dist_to_base, gromov_product, polar_point
from .lattice import Lattice, closest_lattice_point, sample_voronoi, voronoi_membership
from .streams import IncrementStream, trajectory_seeds
from .groups import (
    GroupBall,
    GroupElement,
    Presentation,
    build_ball,
    folner_ratio,
    folner_ratios,
    genus2_presentation,
    lattice_presentation,
    presentation_from_name,
)
from .dirichlet import (
    HyperbolicContext,
    TorusContext,
    context_from_name,
    genus2_context,
    in_domain,
    kernel,
    lift,
    nonlocal_perimeter_ratio,
    torus_context,
)
from .walk import (
    Ensemble,
    Trajectory,
    WalkState,
    defect,
    draw_increment,
    gromov_series,
    simulate,
    simulate_ensemble,
    step,
)
from . import stats

__all__ = [
    "HPoint",
    "ScaledIsometry",
    "dist",
    "dist_to_base",
    "gromov_product",
    "polar_point",
    "Lattice",
    "closest_lattice_point",
    "sample_voronoi",
    "voronoi_membership",
    "IncrementStream",
    "trajectory_seeds",
    "GroupBall",
    "GroupElement",
    "Presentation",
    "build_ball",
    "folner_ratio",
    "folner_ratios",
    "genus2_presentation",
    "lattice_presentation",
    "presentation_from_name",
    "HyperbolicContext",
    "TorusContext",
    "context_from_name",
    "genus2_context",
    "in_domain",
    "kernel",
    "lift",
    "nonlocal_perimeter_ratio",
    "torus_context",
    "Ensemble",
    "Trajectory",
    "WalkState",
    "defect",
    "draw_increment",
    "gromov_series",
    "simulate",
    "simulate_ensemble",
    "step",
    "stats",
]
