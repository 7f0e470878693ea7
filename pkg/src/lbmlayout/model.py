"""D2Q37 velocity set, quadrature weights and thermal BGK collision.

All per-site math is written against *population planes*: a sequence of 37
items indexed by population, where every item is either a scalar or an
array of any shape (one entry per lattice site).  Only ``+ - * /`` are used
and every reduction runs in canonical population order, so the result for a
given site is bitwise identical whatever the memory layout of the planes.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

NPOP = 37
DIM = 2
SHELL_NORMS = (0, 1, 2, 4, 5, 8, 9, 10)
SHELL_SIZES = (1, 4, 4, 4, 8, 4, 4, 8)

# (power of cx, power of cy, coefficient, power of t0) for the Gaussian moments
# that the weights must reproduce.
MOMENT_CONDITIONS = (
    (0, 0, 1.0, 0),
    (2, 0, 1.0, 1),
    (4, 0, 3.0, 2),
    (2, 2, 1.0, 2),
    (6, 0, 15.0, 3),
    (4, 2, 3.0, 3),
    (8, 0, 105.0, 4),
    (6, 2, 15.0, 4),
    (4, 4, 9.0, 4),
)
# The cx^8 condition is the one left out of the linear solve; the other eight
# rows have full rank, the first eight (in the order above) do not.
_ROOT_ROW = 6


class NonPhysicalStateError(ValueError):
    """Raised when a site has non-positive density."""


@dataclass(frozen=True)
class Macros:
    rho: object
    ux: object
    uy: object
    temp: object

    @property
    def pressure(self):
        # perfect-gas equation of state
        return self.rho * self.temp


@dataclass(frozen=True)
class VelocityModel:
    velocities: np.ndarray
    weights: np.ndarray
    t0: float
    shells: tuple = field(default=())
    npop: int = NPOP
    halo_extent: int = 3

    def __post_init__(self):
        vel = np.asarray(self.velocities, dtype=np.int64)
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        if not self.shells:
            object.__setattr__(self, "shells", shells_of(vel))
        object.__setattr__(self, "npop", len(vel))
        object.__setattr__(self, "halo_extent", int(np.abs(vel).max()) if len(vel) else 0)
        object.__setattr__(self, "_consts", _PopulationConstants(vel, self.weights, self.t0))

    @property
    def cx(self) -> np.ndarray:
        return self.velocities[:, 0]

    @property
    def cy(self) -> np.ndarray:
        return self.velocities[:, 1]

    def opposite(self, p: int) -> int:
        target = -self.velocities[p]
        return int(np.flatnonzero((self.velocities == target).all(axis=1))[0])

    def index_of(self, cx: int, cy: int) -> int:
        hit = np.flatnonzero((self.velocities[:, 0] == cx) & (self.velocities[:, 1] == cy))
        if hit.size == 0:
            raise KeyError((cx, cy))
        return int(hit[0])


def build_velocity_set() -> list[tuple[int, int]]:
    """All integer vectors with |c|^2 in the D2Q37 shells, canonically ordered."""
    out = [
        (cx, cy)
        for cx in range(-3, 4)
        for cy in range(-3, 4)
        if cx * cx + cy * cy in SHELL_NORMS
    ]
    out.sort(key=lambda c: (c[0] * c[0] + c[1] * c[1], c[0], c[1]))
    return out


def shells_of(velocities) -> tuple[tuple[int, ...], ...]:
    vel = np.asarray(velocities)
    norms = (vel**2).sum(axis=1)
    return tuple(tuple(int(i) for i in np.flatnonzero(norms == n)) for n in sorted(set(norms.tolist())))


def _moment_matrix(velocities) -> tuple[np.ndarray, tuple]:
    vel = np.asarray(velocities, dtype=np.float64)
    shells = shells_of(velocities)
    a = np.zeros((len(MOMENT_CONDITIONS), len(shells)))
    for row, (px, py, _, _) in enumerate(MOMENT_CONDITIONS):
        for s, members in enumerate(shells):
            a[row, s] = sum(vel[i, 0] ** px * vel[i, 1] ** py for i in members)
    return a, shells


def _moment_rhs(t0: float) -> np.ndarray:
    return np.array([coef * t0**k for _, _, coef, k in MOMENT_CONDITIONS])


def derive_weights(velocity_set, t_lo: float = 0.1, t_hi: float = 2.0, step: float = 1e-3):
    """Shell weights and lattice temperature from Gaussian moment matching.

    For a trial ``t0`` the shell weights solve eight of the nine moment
    conditions exactly; ``t0`` is the root of the remaining condition's
    residual, bracketed by a grid scan and refined by bisection.

    Returns ``(weights, t0)`` with one weight per velocity.
    """
    a, shells = _moment_matrix(velocity_set)
    rows = [r for r in range(len(MOMENT_CONDITIONS)) if r != _ROOT_ROW]
    sub = a[rows]
    if np.linalg.matrix_rank(sub) < len(shells):
        raise ValueError("velocity set does not determine shell weights")

    def shell_weights(t0):
        return np.linalg.solve(sub, _moment_rhs(t0)[rows])

    def residual(t0):
        return a[_ROOT_ROW] @ shell_weights(t0) - _moment_rhs(t0)[_ROOT_ROW]

    grid = np.arange(t_lo + step, t_hi, step)
    values = np.array([residual(t) for t in grid])
    for i in range(len(grid) - 1):
        if np.sign(values[i]) == np.sign(values[i + 1]) and values[i] != 0.0:
            continue
        lo, hi = grid[i], grid[i + 1]
        flo = values[i]
        while hi - lo > 0.0:
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            fmid = residual(mid)
            if abs(fmid) < 1e-14 or fmid == 0.0:
                lo = hi = mid
                break
            if np.sign(fmid) == np.sign(flo):
                lo, flo = mid, fmid
            else:
                hi = mid
        t0 = float(0.5 * (lo + hi))
        ws = shell_weights(t0)
        if np.all(ws > 0):
            weights = np.empty(len(velocity_set))
            for s, members in enumerate(shells):
                weights[list(members)] = ws[s]
            return weights, t0
    raise ValueError(f"no all-positive weight solution for t0 in ({t_lo}, {t_hi})")


def moment_residuals(model: VelocityModel) -> np.ndarray:
    """Residuals of every moment condition, summed directly over all velocities."""
    c = model.velocities.astype(np.float64)
    out = []
    for px, py, coef, k in MOMENT_CONDITIONS:
        total = float(np.sum(model.weights * c[:, 0] ** px * c[:, 1] ** py))
        out.append(total - coef * model.t0**k)
    return np.array(out)


_DEFAULT: VelocityModel | None = None


def d2q37() -> VelocityModel:
    """The canonical D2Q37 model (cached)."""
    global _DEFAULT
    if _DEFAULT is None:
        vel = build_velocity_set()
        w, t0 = derive_weights(vel)
        _DEFAULT = VelocityModel(np.array(vel), w, t0)
    return _DEFAULT


class _PopulationConstants:
    """Per-population float constants used by the equilibrium."""

    def __init__(self, vel, weights, t0):
        t0 = float(t0)
        self.t0 = t0
        self.cx = [float(v) for v in vel[:, 0]]
        self.cy = [float(v) for v in vel[:, 1]]
        self.c2 = [float(x * x + y * y) for x, y in vel]
        self.w = [float(x) for x in weights]
        self.inv1 = 1.0 / t0
        self.inv2 = 1.0 / (2.0 * t0 * t0)
        self.inv3 = 1.0 / (6.0 * t0 * t0 * t0)
        self.inv4 = 1.0 / (24.0 * t0 * t0 * t0 * t0)
        # theta-dependent polynomial coefficients, one set per population
        self.k2 = [c2 - DIM * t0 for c2 in self.c2]
        self.k3 = [3.0 * c2 - (3 * DIM + 6) * t0 for c2 in self.c2]
        self.k4a = [6.0 * c2 - 6.0 * (DIM + 4) * t0 for c2 in self.c2]
        self.k4b = [-6.0 * t0 * c2 for c2 in self.c2]
        self.k4c = [
            3.0 * c2 * c2 - 6.0 * (DIM + 2) * t0 * c2 + 3.0 * DIM * (DIM + 2) * t0 * t0 for c2 in self.c2
        ]
        self.t0sq3 = 3.0 * t0 * t0
        self.t0x6 = 6.0 * t0
        self.t0x3 = 3.0 * t0
        self.t0sq_u2 = 6.0 * (DIM + 2) * t0 * t0


def _check_density(rho):
    if np.any(np.asarray(rho) <= 0):
        raise NonPhysicalStateError("non-positive density")


def macros(populations: Sequence, model: VelocityModel | None = None) -> Macros:
    """Density, velocity and temperature of population planes.

    Sums run over populations in canonical order.
    """
    k = (model or d2q37())._consts
    f = populations
    rho = f[0]
    jx = 0.0
    jy = 0.0
    e = 0.0
    for p in range(1, len(k.cx)):
        fp = f[p]
        rho = rho + fp
        cx, cy = k.cx[p], k.cy[p]
        if cx:
            jx = jx + cx * fp
        if cy:
            jy = jy + cy * fp
        e = e + k.c2[p] * fp
    _check_density(rho)
    ux = jx / rho
    uy = jy / rho
    temp = (e / rho - (ux * ux + uy * uy)) * (1.0 / DIM)
    return Macros(rho, ux, uy, temp)


def equilibrium_planes(m: Macros, model: VelocityModel | None = None) -> list:
    """Fourth-order thermal Hermite equilibrium, one plane per population."""
    k = (model or d2q37())._consts
    t0 = k.t0
    rho, ux, uy = m.rho, m.ux, m.uy
    dt = m.temp - t0  # (theta - 1) * t0
    u2 = ux * ux + uy * uy
    dt2 = dt * dt
    base4 = k.t0sq3 * (u2 * u2) + dt * (k.t0sq_u2 * u2)
    cu_u2_3 = k.t0x3 * u2
    cu_u2_6 = k.t0x6 * u2
    out = []
    for p in range(len(k.cx)):
        cx, cy = k.cx[p], k.cy[p]
        if cx and cy:
            cu = cx * ux + cy * uy
        elif cx:
            cu = cx * ux
        elif cy:
            cu = cy * uy
        else:
            cu = None
        h2 = dt * k.k2[p] - t0 * u2
        h4 = base4 + dt * (k.k4b[p] * u2) + dt2 * k.k4c[p]
        if cu is not None:
            cu2 = cu * cu
            h2 = h2 + cu2
            h3 = cu * (cu2 - cu_u2_3 + dt * k.k3[p])
            h4 = h4 + cu2 * (cu2 - cu_u2_6 + dt * k.k4a[p])
            s = 1.0 + cu * k.inv1 + h2 * k.inv2 + h3 * k.inv3 + h4 * k.inv4
        else:
            s = 1.0 + h2 * k.inv2 + h4 * k.inv4
        out.append((k.w[p] * rho) * s)
    return out


def equilibrium(m: Macros, model: VelocityModel | None = None) -> np.ndarray:
    """Equilibrium populations for macroscopic fields ``m``; population axis first."""
    return np.array(equilibrium_planes(m, model))


def relax_planes(populations: Sequence, omega: float, model: VelocityModel | None = None) -> list:
    """BGK relaxation of population planes toward their local equilibrium."""
    feq = equilibrium_planes(macros(populations, model), model)
    return [fp + omega * (fe - fp) for fp, fe in zip(populations, feq)]


def collide_site(populations, omega: float, model: VelocityModel | None = None) -> np.ndarray:
    f = np.asarray(populations, dtype=np.float64)
    return np.array(relax_planes(list(f), omega, model))


def equilibrium_fixed_point(m: Macros, model: VelocityModel | None = None, max_iter: int = 64) -> np.ndarray:
    """Equilibrium populations that collide leaves bitwise unchanged.

    The Hermite equilibrium reproduces its own moments only to rounding, so
    ``collide(equilibrium(m))`` can move by an ulp.  Iterating the projection
    ``f -> equilibrium(macros(f))`` settles on a state with no such drift.
    """
    f = equilibrium(m, model)
    for _ in range(max_iter):
        g = np.array(equilibrium_planes(macros(list(f), model), model))
        if np.array_equal(g, f):
            return g
        f = g
    warnings.warn("equilibrium projection did not reach a bitwise fixed point", RuntimeWarning)
    return f


class _CountingFloat:
    """Float wrapper that counts arithmetic operations."""

    __slots__ = ("v", "counter")

    def __init__(self, v, counter):
        self.v = float(v)
        self.counter = counter

    def _op(self, other, fn):
        self.counter[0] += 1
        o = other.v if isinstance(other, _CountingFloat) else other
        return _CountingFloat(fn(self.v, o), self.counter)

    def _rop(self, other, fn):
        self.counter[0] += 1
        return _CountingFloat(fn(other, self.v), self.counter)

    __add__ = lambda s, o: s._op(o, float.__add__)  # noqa: E731
    __sub__ = lambda s, o: s._op(o, float.__sub__)  # noqa: E731
    __mul__ = lambda s, o: s._op(o, float.__mul__)  # noqa: E731
    __truediv__ = lambda s, o: s._op(o, float.__truediv__)  # noqa: E731
    __radd__ = lambda s, o: s._rop(o, float.__add__)  # noqa: E731
    __rsub__ = lambda s, o: s._rop(o, float.__sub__)  # noqa: E731
    __rmul__ = lambda s, o: s._rop(o, float.__mul__)  # noqa: E731
    __rtruediv__ = lambda s, o: s._rop(o, float.__truediv__)  # noqa: E731

    def __le__(self, other):
        return self.v <= other

    def __float__(self):
        return self.v


def count_flops_per_site(model: VelocityModel | None = None, omega: float = 1.0) -> int:
    """Floating-point operations one site collision performs, counted by tracing."""
    model = model or d2q37()
    counter = [0]
    f = [_CountingFloat(w, counter) for w in model.weights]
    relax_planes(f, omega, model)
    return counter[0]


def save_model_table(model: VelocityModel, path) -> None:
    """Write ``index cx cy weight`` rows with 17 significant digits."""
    Path(path).write_text(format_model_table(model))


def format_model_table(model: VelocityModel) -> str:
    lines = [f"# D2Q37 quadrature, t0 = {model.t0:.17g}", "# index cx cy weight"]
    for i, ((cx, cy), w) in enumerate(zip(model.velocities.tolist(), model.weights)):
        lines.append(f"{i} {cx} {cy} {w:.17g}")
    return "\n".join(lines) + "\n"


def parse_model_table(text: str) -> VelocityModel:
    t0 = None
    vel, weights = [], []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if "t0 =" in line:
                t0 = float(line.split("t0 =")[1])
            continue
        idx, cx, cy, w = line.split()
        if int(idx) != len(vel):
            raise ValueError(f"row index {idx} out of order")
        vel.append((int(cx), int(cy)))
        weights.append(float(w))
    if t0 is None:
        raise ValueError("model table lacks a t0 header line")
    return VelocityModel(np.array(vel), np.array(weights), t0)


def load_model_table(path) -> VelocityModel:
    return parse_model_table(Path(path).read_text())

