# %% [markdown]
# # Flux decay under a linear Reeb flow
#
# With H = wp * k * y - 1 the base point grows like exp(k t) while the flux
# shrinks like exp(-k t). The constraint wp * H_wp - H stays at exactly one.

# %%
import numpy as np

from stochcontact.dynamics import PhasePoint, constraint_series, integrate, reeb_linear

# %%
for k in (0.25, 0.5, 1.0):
    H = reeb_linear(k)
    tr = integrate(H, PhasePoint(0.0, [1.0], [2.0]), h=1e-3, steps=1000)
    eps = constraint_series(H, tr)
    print(f"k={k:4}: wp(1)={tr.wp[-1, 0]:.12f}  exact={2 * np.exp(-k):.12f}  eps drift={eps.drift:.1e}")

# %% [markdown]
# A Hamiltonian that is not linear in the flux does not keep the constraint
# fixed. The free particle does, because H_y = 0 freezes wp.

# %%
from stochcontact.dynamics import polynomial

H = polynomial({(0, 0, 2): 0.5, (0, 2, 0): 0.5}, 1)  # oscillator
tr = integrate(H, PhasePoint(0.0, [1.0], [0.0]), 1e-2, 100)
print("oscillator eps range:", np.ptp(constraint_series(H, tr).values))
