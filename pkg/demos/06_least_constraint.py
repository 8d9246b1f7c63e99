# %% [markdown]
# # The constraint action is stationary on flow lines
#
# The discrete action sums wp . dy - H dt over segment midpoints. On an RK4
# trajectory its gradient nearly vanishes, so bending the path changes the
# action only at second order. Newton steps on the stationarity residual pull
# a bent path back onto the flow.

# %%
import numpy as np

from stochcontact.dynamics import PhasePoint, integrate, reeb_linear
from stochcontact.variational import DiscretePath, action, descend, first_variation

H = reeb_linear(0.5)
sol = DiscretePath.from_trajectory(integrate(H, PhasePoint(0.0, [1.0], [2.0]), 1e-3, 1000))
print("action on the solution:", action(H, sol))
print("gradient norm:", first_variation(H, sol).gradNorm)

# %%
phi = np.sin(np.pi * np.linspace(0, 1, len(sol)))[:, None]


def bent(eta):
    return DiscretePath(sol.t, sol.y + eta * phi, sol.wp - 0.5 * eta * phi)


for eta in (1e-1, 1e-2, 1e-3, 1e-4):
    print(f"eta={eta:.0e}: |dS| = {abs(action(H, bent(eta)) - action(H, sol)):.3e}")

# %%
res = descend(H, bent(1e-2))
print(f"descent: {res.accepted} accepted steps, gradNorm {res.gradNorm:.1e}, "
      f"max |y - y_sol| = {np.max(np.abs(res.path.y - sol.y)):.1e}")
