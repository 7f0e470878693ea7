"""Scalar oracle and cross-layout validation.

The oracle works on plain ``[x, y, p]`` arrays with explicit modular
arithmetic and shares no index code with :mod:`lbmlayout.layout`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import kernels
from .layout import Kind, LatticeGeometry, LayoutDescriptor, OffsetTable
from .model import Macros, VelocityModel, d2q37, equilibrium, relax_planes

DEFAULT_GEOMETRIES = ((16, 32), (64, 128))
DEFAULT_VL = (1, 2, 4, 8)


def oracle_propagate(lattice: np.ndarray, velocities) -> np.ndarray:
    """``out[x, y, p] = in[(x - cx_p) mod lx, (y - cy_p) mod ly, p]``."""
    lx, ly, npop = lattice.shape
    out = np.empty_like(lattice)
    xs, ys = np.arange(lx), np.arange(ly)
    for p, (cx, cy) in enumerate(np.asarray(velocities)):
        src_x = (xs - cx) % lx
        src_y = (ys - cy) % ly
        out[:, :, p] = lattice[src_x[:, None], src_y[None, :], p]
    return out


def oracle_collide(lattice: np.ndarray, omega: float, model: VelocityModel | None = None) -> np.ndarray:
    planes = [lattice[:, :, p] for p in range(lattice.shape[2])]
    return np.stack(relax_planes(planes, omega, model), axis=-1)


def oracle_step(lattice, omega, model=None):
    model = model or d2q37()
    return oracle_collide(oracle_propagate(lattice, model.velocities), omega, model)


def random_state(lx: int, ly: int, seed: int = 0, model: VelocityModel | None = None,
                 noise: float = 0.01) -> np.ndarray:
    """Near-equilibrium lattice with random macroscopic fields, ``[x, y, p]``."""
    model = model or d2q37()
    rng = np.random.default_rng(seed)
    m = Macros(
        rng.uniform(0.9, 1.1, (lx, ly)),
        rng.uniform(-0.05, 0.05, (lx, ly)),
        rng.uniform(-0.05, 0.05, (lx, ly)),
        model.t0 * rng.uniform(0.9, 1.1, (lx, ly)),
    )
    f = np.moveaxis(equilibrium(m, model), 0, -1)
    return f * (1.0 + noise * rng.uniform(-1.0, 1.0, f.shape))


@dataclass
class CaseResult:
    layout: str
    vl: int
    lx: int
    ly: int
    workers: int
    passed: bool
    first_divergence: tuple[int, int, int] | None = None
    max_abs_diff: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        where = "" if self.first_divergence is None else f" first divergence at (x, y, p)={self.first_divergence}"
        return f"{tag} {self.layout:<7} vl={self.vl} {self.lx}x{self.ly} workers={self.workers}{where}"


@dataclass
class ValidationReport:
    steps: int
    seed: int
    cases: list[CaseResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cases)

    def summary(self) -> str:
        head = f"validation: {sum(c.passed for c in self.cases)}/{len(self.cases)} cases pass ({self.steps} steps, seed {self.seed})"
        return "\n".join([head] + [c.line() for c in self.cases])


def compare(got: np.ndarray, want: np.ndarray, rtol: float | None = None):
    """Return ``(ok, first differing [x, y, p] or None, max abs diff)``."""
    if rtol is None:
        bad = got != want
    else:
        bad = ~np.isclose(got, want, rtol=rtol, atol=0.0)
    bad |= np.isnan(got) != np.isnan(want)
    diff = float(np.nanmax(np.abs(got - want))) if got.size else 0.0
    if not bad.any():
        return True, None, diff
    first = tuple(int(i) for i in np.argwhere(bad)[0])
    return False, first, diff


def run_validation(geometries: Iterable[tuple[int, int]] = DEFAULT_GEOMETRIES,
                   vl_list: Iterable[int] = DEFAULT_VL,
                   layouts: Iterable = tuple(Kind),
                   steps: int = 10, seed: int = 0, omega: float = 1.0,
                   workers: int = 1, schedule: str = "dynamic", rtol: float | None = None,
                   offsets: Callable[[LayoutDescriptor], OffsetTable] | None = None,
                   model: VelocityModel | None = None) -> ValidationReport:
    """Run every layout/vl combination for ``steps`` steps against the oracle.

    Comparison is bitwise unless ``rtol`` is given.  ``offsets`` substitutes
    the propagate offset table (fault injection).
    """
    model = model or d2q37()
    report = ValidationReport(steps=steps, seed=seed)
    layouts = [Kind.parse(k) if not isinstance(k, Kind) else k for k in layouts]
    for lx, ly in geometries:
        start = random_state(lx, ly, seed, model)
        want = start
        for _ in range(steps):
            want = oracle_step(want, omega, model)
        for kind in layouts:
            # vl does not change AoS/SoA storage; run them once per geometry
            vls = list(vl_list) if kind.clustered else [1]
            for vl in vls:
                desc = LayoutDescriptor(kind, LatticeGeometry(lx, ly, vl=vl))
                state = kernels.LatticeState.from_canonical(start, desc, model)
                table = offsets(desc) if offsets else None
                for _ in range(steps):
                    kernels.step(state, omega, workers=workers, schedule=schedule, offsets=table)
                ok, first, diff = compare(state.canonical(), want, rtol)
                report.cases.append(CaseResult(kind.value, vl, lx, ly, workers, ok, first, diff))
    return report
