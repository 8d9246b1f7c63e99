# %% [markdown]
# # Densities driven by a truncated generator
#
# The generator sums signed derivatives weighted by the coefficients D. With
# only D^(1,1) = 1 it is the heat equation, so a narrow Gaussian spreads with
# variance growing by 2 per unit time.

# %%
import numpy as np

from stochcontact.kinetic import (
    CoefficientSet,
    apply_generator,
    cfl_limit,
    evolve,
    gaussian_density,
    stationary_second_order,
)

P0 = gaussian_density(0.0, 0.01, [(-10.0, 10.0)], 401)
D = CoefficientSet({(0, 0): 1.0})
steps = int(np.ceil(1.0 / cfl_limit(D, P0)))
P = evolve(D, P0, 1.0 / steps, steps)
print(f"{steps} steps, variance {P.variance()[0]:.6f} (expect 2.01), mass {P.mass():.15f}")

# %% drift moves the mean
D = CoefficientSet({(0,): 0.3, (0, 0): 0.02})
P0 = gaussian_density(0.0, 0.05, [(-2.0, 3.0)], 501)
steps = int(np.ceil(1.0 / cfl_limit(D, P0)))
print("mean shift:", evolve(D, P0, 1.0 / steps, steps).mean()[0] - P0.mean()[0])

# %% [markdown]
# Between reflecting walls drift and diffusion balance in an exponential
# profile. In two dimensions a sparse solve gives the balance directly.

# %%
P = stationary_second_order([1.0], [[1.0]], [(0, 1)], 200)
y = P.axes()[0]
print("1-D profile error:", np.max(np.abs(P.values - np.exp(y) / (np.e - 1))))

P2 = stationary_second_order([0.5, -0.3], [[1.0, 0.2], [0.2, 0.8]], [(0, 1), (0, 1)], 60)
L = CoefficientSet({(0,): 0.5, (1,): -0.3, (0, 0): 1.0, (0, 1): 0.2, (1, 1): 0.8})
print("2-D residual:", np.max(np.abs(apply_generator(L, P2))))
