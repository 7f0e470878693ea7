"""Halo exchange, propagate and collide over a layout-backed lattice.

Work is split into x-column slices; with more than one worker the slices
are handed to a thread pool.  Slices never share written sites, so results
do not depend on the worker count or the schedule.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Callable

import numpy as np

from . import layout as lay
from .layout import LayoutDescriptor, OffsetTable, SiteCoord
from .model import VelocityModel, collide_site, d2q37, relax_planes

SCHEDULES = ("dynamic", "static")


class LatticeState:
    """Double-buffered populations in one layout.

    ``prv`` holds the current state between steps; ``nxt`` receives the
    propagated populations and is swapped in after collide.
    """

    def __init__(self, descriptor: LayoutDescriptor, model: VelocityModel | None = None):
        self.descriptor = descriptor
        self.model = model or d2q37()
        if descriptor.npop != self.model.npop:
            raise ValueError("descriptor and model disagree on the number of populations")
        g = descriptor.geometry
        ext = self.model.halo_extent
        if g.hx < ext or g.hy < ext:
            raise lay.GeometryError(f"halo widths ({g.hx}, {g.hy}) smaller than the stencil reach {ext}")
        self.prv = descriptor.allocate()
        self.nxt = descriptor.allocate()
        self.time_step = 0
        self._offsets = descriptor.offsets(self.model.velocities)

    @classmethod
    def from_canonical(cls, arr, descriptor, model=None) -> "LatticeState":
        state = cls(descriptor, model)
        lay.from_canonical(arr, descriptor, out=state.prv)
        return state

    @property
    def geometry(self):
        return self.descriptor.geometry

    @property
    def offsets(self) -> OffsetTable:
        return self._offsets

    def canonical(self) -> np.ndarray:
        return lay.to_canonical(self.prv, self.descriptor)

    def dumps(self) -> bytes:
        return lay.dumps(self.canonical())

    def converted(self, descriptor: LayoutDescriptor) -> "LatticeState":
        out = LatticeState(descriptor, self.model)
        out.prv[...] = lay.convert(self.prv, self.descriptor, descriptor)
        out.time_step = self.time_step
        return out

    def swap(self) -> None:
        self.prv, self.nxt = self.nxt, self.prv


# -- scheduling ----------------------------------------------------------------

@lru_cache(maxsize=None)
def _pool(workers: int) -> ThreadPoolExecutor:
    return ThreadPoolExecutor(max_workers=workers, thread_name_prefix="lbm")


def _slices(lx: int, workers: int, schedule: str, chunk: int) -> list[tuple[int, int]]:
    if schedule == "static":
        bounds = np.linspace(0, lx, workers + 1).round().astype(int)
        return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if schedule != "dynamic":
        raise ValueError(f"schedule must be one of {SCHEDULES}")
    return [(x, min(x + chunk, lx)) for x in range(0, lx, chunk)]


def run_columns(fn: Callable[[int, int], None], lx: int, workers: int = 1,
                schedule: str = "dynamic", chunk: int = 1) -> None:
    """Call ``fn(x0, x1)`` over disjoint column ranges covering ``0..lx``."""
    parts = _slices(lx, workers, schedule, max(1, chunk))
    if workers <= 1:
        for x0, x1 in parts:
            fn(x0, x1)
        return
    # dynamic: idle workers pick up the next queued slice
    for fut in [_pool(workers).submit(fn, x0, x1) for x0, x1 in parts]:
        fut.result()


# -- kernels -------------------------------------------------------------------

def halo_exchange(state: LatticeState) -> LatticeState:
    """Fill ghost rows and columns of ``prv`` with periodic images.

    A ghost row of lane ``k`` at strip position ``j`` holds the site
    ``(k * strip + j - hy) mod ly``, which lives in a neighbouring lane's
    strip; the x ghosts are then copied as whole padded columns.
    """
    desc = state.descriptor
    g = desc.geometry
    v = desc.padded_view(state.prv)
    strip, lanes, hy = desc.strip, desc.lanes, g.hy
    lane_ids = np.arange(lanes)
    ghost_rows = list(range(hy)) + list(range(hy + strip, strip + 2 * hy))
    for j in ghost_rows:
        y = (lane_ids * strip + (j - hy)) % g.ly
        src_lane, src_row = y // strip, y % strip + hy
        # advanced indices on axes 1 and 3 move to the front: [lane, X, p]
        v[:, j, :, :] = v[:, src_row, :, src_lane].transpose(1, 2, 0)
    hx, lx = g.hx, g.lx
    for gcol in range(hx):
        v[gcol] = v[hx + (gcol - hx) % lx]
        v[hx + lx + gcol] = v[hx + gcol % lx]
    return state


def propagate(state: LatticeState, workers: int = 1, schedule: str = "dynamic",
              offsets: OffsetTable | None = None, nontemporal: bool = False) -> LatticeState:
    """Pull every population from the site one hop upstream into ``nxt``.

    Each column copy reads ``prv`` at the write position plus ``off[p]``;
    ``nontemporal`` is a streaming-store hint and has no effect on values.
    """
    desc = state.descriptor
    off = state.offsets if offsets is None else offsets
    lanes, run, ss = desc.lanes, desc.strip, desc.site_stride
    src = state.prv.reshape(-1, lanes)
    dst = state.nxt.reshape(-1, lanes)
    npop = desc.npop
    span = run * ss

    def columns(x0, x1):
        for x in range(x0, x1):
            for p in range(npop):
                i = desc.unit_base(p, x)
                j = i + off[p]
                dst[i : i + span : ss] = src[j : j + span : ss]

    run_columns(columns, desc.geometry.lx, workers, schedule, chunk=1)
    return state


def _collide_chunk(lx: int, workers: int) -> int:
    # per-column numpy calls are too fine-grained for the collide arithmetic
    return max(1, math.ceil(lx / (4 * max(1, workers))))


def collide(state: LatticeState, omega: float, workers: int = 1, schedule: str = "dynamic",
            chunk: int | None = None) -> LatticeState:
    """Relax the propagated populations in ``nxt`` in place, then swap buffers."""
    desc = state.descriptor
    model = state.model
    buf = state.nxt
    npop = desc.npop

    def columns(x0, x1):
        inner = desc.interior(buf, x0, x1)
        planes = [inner[:, :, p, :] for p in range(npop)]
        new = relax_planes(planes, omega, model)
        for p in range(npop):
            inner[:, :, p, :] = new[p]

    lx = desc.geometry.lx
    run_columns(columns, lx, workers, schedule, chunk or _collide_chunk(lx, workers))
    state.swap()
    return state


def step(state: LatticeState, omega: float, workers: int = 1, schedule: str = "dynamic",
         offsets: OffsetTable | None = None, nontemporal: bool = False) -> LatticeState:
    halo_exchange(state)
    propagate(state, workers, schedule, offsets, nontemporal)
    collide(state, omega, workers, schedule)
    state.time_step += 1
    return state


def run(state: LatticeState, steps: int, omega: float, **kw) -> LatticeState:
    for _ in range(steps):
        step(state, omega, **kw)
    return state


# -- scalar reference paths ----------------------------------------------------

def propagate_scalar(state: LatticeState) -> LatticeState:
    """Site-by-site pull with explicit periodic wrap; no halos involved."""
    desc = state.descriptor
    g = desc.geometry
    vel = state.model.velocities
    for x in range(g.lx):
        for y in range(g.ly):
            for p, (cx, cy) in enumerate(vel):
                src = SiteCoord((x - cx) % g.lx, (y - cy) % g.ly, p)
                state.nxt[desc.address(SiteCoord(x, y, p))] = state.prv[desc.address(src)]
    return state


def collide_scalar(state: LatticeState, omega: float) -> LatticeState:
    desc = state.descriptor
    g = desc.geometry
    npop = desc.npop
    for x in range(g.lx):
        for y in range(g.ly):
            addrs = [desc.address(SiteCoord(x, y, p)) for p in range(npop)]
            state.nxt[addrs] = collide_site(state.nxt[addrs], omega, state.model)
    state.swap()
    return state
