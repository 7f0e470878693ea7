# A decaying shear wave: the measured damping rate follows the BGK viscosity.

import numpy as np

from lbmlayout import Kind, LatticeGeometry, LatticeState, LayoutDescriptor, d2q37, step
from lbmlayout.model import Macros, equilibrium, macros

model = d2q37()
lx, ly, omega, steps = 4, 256, 1.0, 300
y = np.arange(ly)
ux = np.broadcast_to(0.01 * np.sin(2 * np.pi * y / ly), (lx, ly))
start = Macros(np.ones((lx, ly)), ux, np.zeros((lx, ly)), np.full((lx, ly), model.t0))

desc = LayoutDescriptor(Kind.CAOSOA, LatticeGeometry(lx, ly, vl=8))
state = LatticeState.from_canonical(np.moveaxis(equilibrium(start, model), 0, -1), desc, model)


def amplitude(state):
    f = state.canonical()
    u = np.asarray(macros([f[:, :, p] for p in range(model.npop)], model).ux)
    return np.abs(np.fft.rfft(u.mean(axis=0))[1])


amps = [amplitude(state)]
for _ in range(steps):
    step(state, omega)
    amps.append(amplitude(state))

k = 2 * np.pi / ly
nu = model.t0 * (1 / omega - 0.5)
rate = -np.log(amps[-1] / amps[50]) / (steps - 50)
print(f"measured decay rate {rate:.4e}, nu k^2 = {nu * k * k:.4e}")
assert np.all(np.diff(amps) < 0)
