# %% [markdown]
# # Reading generator coefficients off a path ensemble
#
# Cumulants of independent increments grow linearly in time. Their slopes,
# divided by k!, are the coefficients the kinetic module consumes.

# %%
import numpy as np

from stochcontact.cumulants import estimate_B, estimate_D, gaussian, moments_to_cumulants, poisson, sample_paths

t = np.linspace(0.0, 1.0, 11)

# %% drift 0.3, variance rate 0.04
E = sample_paths(gaussian(0.3, 0.04), 100_000, t, seed=1, workers=4)
D = estimate_D(moments_to_cumulants(E, 2))
for alpha in [(0,), (0, 0)]:
    print(alpha, f"{D[alpha]:.5f} +- {D.se[alpha]:.5f}")

# %% every Poisson cumulant equals the rate
T = moments_to_cumulants(sample_paths(poisson(1.5), 100_000, t, seed=2), 4)
for k in range(1, 5):
    a = (0,) * k
    print(f"order {k}: {T[a][-1]:.4f} +- {T.stderr(a)[-1]:.4f}")

# %% flux coefficients contract against the drift
B = estimate_B(E)
print("B ydot =", B[((0,), 0)] * B.ydot[0], " -D1 =", -D[(0,)])
