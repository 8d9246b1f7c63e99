# %% [markdown]
# # Checking the contact condition pointwise
#
# Theta = H dt - wp dy is contact wherever Theta ^ dTheta^n is nonzero. For
# this form the volume coefficient works out to -n! * eps, so the constraint
# itself tells us where the structure degenerates.

# %%
import numpy as np

from stochcontact.dynamics import PhasePoint, constraint_function, polynomial, reeb_linear
from stochcontact.forms import certify_contact, contact_form_at, contact_two_form_at, volume_coefficient

rng = np.random.default_rng(0)
pts = [PhasePoint.from_vector(z) for z in rng.uniform(-2, 2, size=(50, 3))]

# %% normal form dt - wp dy
rep = certify_contact(polynomial({(0, 0, 0): 1.0}, 1), pts)
print("normal form passed:", rep.passed, " min |vol| =", rep.min_abs_volume)

# %% H = 0 leaves only -wp dy, which is never contact
rep = certify_contact(polynomial({(0, 0, 0): 0.0}, 1), pts)
print("zero Hamiltonian failures:", len(rep.failures), "of", len(pts))

# %% volume against the constraint for a Reeb Hamiltonian
H = reeb_linear(0.5)
eps = constraint_function(H)
for p in pts[:5]:
    vol = volume_coefficient(contact_form_at(H, p), contact_two_form_at(H, p))
    print(f"vol={vol:+.6f}  -eps={-eps(p):+.6f}")
