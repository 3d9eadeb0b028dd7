# %% [markdown]
# # Convergence to the circle at infinity
#
# On the hyperbolic plane the walk picks a direction and keeps it: the
# visual angle at o spanned by the window [N, 2N] of the path shrinks
# roughly like e^{-l N}, and Gromov products of late positions grow linearly.

# %%
import numpy as np

from dirichlet_walk import genus2_context, simulate_ensemble
from dirichlet_walk.stats import boundary_convergence, deviation_tail

ctx = genus2_context()
ens = simulate_ensemble(ctx, 512, 200, seed=3)
rep = boundary_convergence(ens, (32, 64, 128, 256))
print("window N     median angular spread   median min <Z_n, Z_m>_o (n, m >= N)")
for N, osc, g in zip(rep["windows"], rep["median_oscillation"], rep["median_min_gromov"]):
    print(f"{N:8d}     {osc:20.3e}   {g:12.2f}")
print(f"fraction of paths with non-increasing spread: {rep['fraction_nonincreasing']:.3f}")

# %% [markdown]
# A walk that tracks a geodesic only strays from it by an exponentially rare
# amount: the tail of the Gromov product <Z_0, Z_n>_{Z_k} is log-linear.

# %%
fit = deviation_tail(simulate_ensemble(ctx, 128, 20000, seed=4))
print(f"\nlog P(<Z_0, Z_n>_Z_k >= t) ~ {fit.intercept:.3f} + ({fit.slope:.3f}) t,  r^2 = {fit.r_squared:.4f}")
for t, lp in list(zip(fit.x, fit.log_p))[::4]:
    print(f"  t = {t:5.2f}   P = {np.exp(lp):.2e}")
