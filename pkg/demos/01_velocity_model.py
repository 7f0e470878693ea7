# The D2Q37 velocity set and its quadrature weights.

import numpy as np

from lbmlayout import d2q37
from lbmlayout.model import Macros, equilibrium, format_model_table, macros, moment_residuals

model = d2q37()
print(f"{model.npop} velocities, t0 = {model.t0:.15f}")

# shells of equal speed share one weight
for members in model.shells:
    p = members[0]
    norm2 = model.cx[p] ** 2 + model.cy[p] ** 2
    print(f"|c|^2 = {norm2:2d}  {len(members)} vectors  w = {model.weights[p]:.3e}")

# the weights reproduce Gaussian moments to round-off
print("largest moment residual:", np.abs(moment_residuals(model)).max())

# an equilibrium carries exactly the macroscopic fields it was built from
m = Macros(1.1, 0.04, -0.02, 0.9 * model.t0)
f = equilibrium(m, model)
back = macros(list(f), model)
print("rho, ux, uy, T ->", back.rho, back.ux, back.uy, back.temp)
assert np.allclose([back.rho, back.ux, back.uy, back.temp], [m.rho, m.ux, m.uy, m.temp])

print(format_model_table(model).splitlines()[0])
