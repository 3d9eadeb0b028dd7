# %% [markdown]
# # Shifted walks and the subadditive cocycle
#
# Increments are a pure function of (seed, index), so restarting a walk at
# index n replays exactly the increments the original walk used after time
# n. The distance travelled by the shifted walk is then within 2 R_dom of the
# distance travelled by the original walk over the same stretch.

# %%
import numpy as np

from dirichlet_walk import genus2_context, trajectory_seeds
from dirichlet_walk.walk import coupled_pair, coupling_gaps, defect, subadditivity_slack

ctx = genus2_context()
seeds = trajectory_seeds(7, 50)
gaps = coupling_gaps(ctx, 32, 128, seeds)
print(f"largest |d(Z_n, Z_n+m) - d(o, Z_m o T^n)| over 50 pairs: {gaps.max():.3f}")
print(f"bound 2 R_dom:                                           {2 * ctx.R_dom:.3f}")

# %% [markdown]
# The defect of additivity for f_n = d(o, Z_n) stays bounded in m, which is
# what makes the subadditive ergodic theorem applicable to f + R.

# %%
A, B = coupled_pair(ctx, 32, 128, seed=int(seeds[0]))
psi = [defect(A, B, 32, m) for m in (1, 8, 32, 128)]
print("\ndefect Psi_{32,m} for m = 1, 8, 32, 128:", np.round(psi, 3))

slack = subadditivity_slack(ctx, 32, 128, seeds)
print(f"min of f_n + f_m o T^n + 2 R_dom - f_(n+m): {slack.min():.3f}  (never negative)")
