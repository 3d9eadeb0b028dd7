# %% [markdown]
# # Amenable versus non-amenable deck groups
#
# Two views of the same dichotomy. Combinatorially, the boundary-to-volume
# ratio of word balls goes to 0 for Z^2 but stays near 6 for the surface
# group. Analytically, the two-step non-local perimeter of a metric ball
# decays like 1/r on R^2 and stays bounded away from 0 on the hyperbolic plane.

# %%
from dirichlet_walk import genus2_context, nonlocal_perimeter_ratio, presentation_from_name, torus_context
from dirichlet_walk.groups import folner_ratios

for name, radii in (("lattice:2", [5, 10, 20, 40]), ("genus2", [2, 3, 4, 5, 6])):
    ratios = folner_ratios(presentation_from_name(name), radii)
    print(f"{name:10s} |dB_n| / |B_n|:", "  ".join(f"n={n}: {float(q):.4f}" for n, q in zip(radii, ratios)))

# %%
print()
for label, ctx, radii in (("genus-2", genus2_context(), [2, 4, 6]), ("Z^2", torus_context("lattice:2"), [2, 4, 8, 16])):
    ests = [nonlocal_perimeter_ratio(ctx, r, 20000, seed=5) for r in radii]
    print(f"{label:8s} perimeter / volume:", "  ".join(f"r={e.radius:g}: {e.ratio:.4f}" for e in ests))

# %% [markdown]
# Recurrence is the last piece: on R^2 returns near o keep accumulating,
# on R^3 they stop.

# %%
from dirichlet_walk import simulate_ensemble
from dirichlet_walk.stats import recurrence_stat

for name in ("lattice:2", "lattice:3"):
    ens = simulate_ensemble(torus_context(name), 3000, 1000, seed=6, keep_path=False)
    fr = [round(recurrence_stat(ens, 1.0, N, exit_radius=2.0)[0], 3) for N in (30, 300, 3000)]
    print(f"{name}: return to B(o,1) after leaving B(o,2), by N = 30/300/3000: {fr}")
