# %% [markdown]
# # Path dependence of transported probability
#
# Transporting P along a path adds the line integral of the flux covector.
# When that covector is not a gradient, two routes between the same points
# disagree by the integral around the loop they enclose.

# %%
import numpy as np

from stochcontact.transport import FluxField, loop_holonomy, path_dependence_experiment, polyline, surface_integral

shear = FluxField(lambda Y: np.column_stack([np.zeros(len(Y)), Y[:, 0]]), 2)
grad = FluxField(lambda Y: Y[:, ::-1].copy(), 2)  # gradient of y1 * y2

for name, wp in [("shear", shear), ("gradient", grad)]:
    rep = path_dependence_experiment(wp, (0, 0), (1, 0), (0, 1), (1, 1))
    print(f"{name:8}: via B {rep['deltaP_via_B']:.6f}, via B' {rep['deltaP_via_Bprime']:.6f}, "
          f"difference {rep['difference']:.6f}, loop {rep['loop_holonomy']:.6f}")

# %% Stokes on a pentagon
ang = np.linspace(0, 2 * np.pi, 6)
poly = np.column_stack([np.cos(ang), np.sin(ang)])
poly[-1] = poly[0]
print("loop:", loop_holonomy(shear, polyline(poly, 2000)), " area integral of curl:", surface_integral(shear, poly))
