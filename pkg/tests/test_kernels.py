import numpy as np
import pytest

from lbmlayout import kernels
from lbmlayout.kernels import LatticeState, collide, halo_exchange, propagate, step
from lbmlayout.layout import GeometryError, Kind, LatticeGeometry, LayoutDescriptor, to_canonical
from lbmlayout.model import Macros, equilibrium, equilibrium_fixed_point, macros
from lbmlayout.validation import oracle_collide, oracle_propagate, random_state

from .conftest import LAYOUT_CASES, descriptor


def state_for(kind, vl, arr):
    lx, ly, _ = arr.shape
    return LatticeState.from_canonical(arr, descriptor(kind, lx, ly, vl))


def ghost(state, x, y, p):
    """Value stored at padded position (x, y) for population p, x/y may be negative."""
    d = state.descriptor
    g = d.geometry
    v = d.padded_view(state.prv)
    if d.lanes == 1:
        return v[x + g.hx, y + g.hy, p, 0]
    raise NotImplementedError


def test_halo_requires_stencil_reach():
    with pytest.raises(GeometryError):
        LatticeState(LayoutDescriptor(Kind.AOS, LatticeGeometry(4, 8, hx=2, hy=3, vl=1)))


@pytest.mark.parametrize("kind,vl", LAYOUT_CASES)
def test_halo_uniform_field(kind, vl, model):
    arr = np.tile(model.weights, (6, 16, 1))
    s = state_for(kind, vl, arr)
    halo_exchange(s)
    v = s.descriptor.padded_view(s.prv)
    np.testing.assert_array_equal(v, np.broadcast_to(model.weights[None, None, :, None], v.shape))


@pytest.mark.parametrize("kind", [Kind.AOS, Kind.SOA])
def test_halo_single_column(kind, rng):
    arr = rng.uniform(size=(1, 8, 37))
    s = state_for(kind, 1, arr)
    halo_exchange(s)
    for x in (-3, -2, -1, 1, 2, 3):
        for y in range(8):
            assert (ghost(s, x, y, 5) == arr[0, y, 5]).all()


@pytest.mark.parametrize("kind,vl", LAYOUT_CASES)
def test_halo_periodic_images(kind, vl, lattice_16x32):
    s = state_for(kind, vl, lattice_16x32)
    halo_exchange(s)
    d = s.descriptor
    g = d.geometry
    v = d.padded_view(s.prv)
    # every padded slot holds the periodic image of its physical coordinate
    for X in range(d.padded_width):
        for row in range(d.padded_height):
            for lane in range(d.lanes):
                x = (X - g.hx) % g.lx
                y = (lane * d.strip + row - g.hy) % g.ly
                np.testing.assert_array_equal(v[X, row, :, lane], lattice_16x32[x, y])


@pytest.mark.parametrize("kind,vl", LAYOUT_CASES)
def test_propagate_delta_impulse(kind, vl, model):
    p = model.index_of(1, 0)
    arr = np.zeros((8, 16, 37))
    arr[3, 5, p] = 1.0
    s = state_for(kind, vl, arr)
    halo_exchange(s)
    propagate(s)
    out = to_canonical(s.nxt, s.descriptor)
    hits = np.argwhere(out != 0)
    assert hits.tolist() == [[4, 5, p]]


@pytest.mark.parametrize("kind,vl", LAYOUT_CASES)
def test_propagate_wraps_across_lane_strips(kind, vl, model):
    p = model.index_of(-1, 3)
    arr = np.zeros((8, 16, 37))
    arr[0, 14, p] = 1.0
    s = state_for(kind, vl, arr)
    halo_exchange(s)
    propagate(s)
    out = to_canonical(s.nxt, s.descriptor)
    assert np.argwhere(out != 0).tolist() == [[7, 1, p]]


@pytest.mark.parametrize("kind,vl", LAYOUT_CASES)
def test_propagate_matches_oracle_and_scalar(kind, vl, lattice_16x32, model):
    want = oracle_propagate(lattice_16x32, model.velocities)
    s = state_for(kind, vl, lattice_16x32)
    halo_exchange(s)
    propagate(s, workers=2)
    got = to_canonical(s.nxt, s.descriptor)
    np.testing.assert_array_equal(got, want)
    rest = model.index_of(0, 0)
    np.testing.assert_array_equal(got[:, :, rest], lattice_16x32[:, :, rest])

    r = state_for(kind, vl, lattice_16x32)
    kernels.propagate_scalar(r)
    np.testing.assert_array_equal(to_canonical(r.nxt, r.descriptor), want)


@pytest.mark.parametrize("kind,vl", [(Kind.AOS, 1), (Kind.CSOA, 2), (Kind.CAOSOA, 4)])
def test_propagate_is_periodic_permutation(kind, vl, rng):
    arr = rng.uniform(size=(4, 8, 37))
    s = state_for(kind, vl, arr)
    for n in range(4 * 8):
        halo_exchange(s)
        propagate(s)
        s.swap()
        if n == 0:
            once = s.canonical()
            for p in range(37):
                assert sorted(once[:, :, p].ravel()) == sorted(arr[:, :, p].ravel())
    np.testing.assert_array_equal(s.canonical(), arr)


def test_propagate_nontemporal_flag_invisible(lattice_16x32):
    a = state_for(Kind.CSOA, 8, lattice_16x32)
    b = state_for(Kind.CSOA, 8, lattice_16x32)
    for s, nt in ((a, False), (b, True)):
        halo_exchange(s)
        propagate(s, nontemporal=nt)
    np.testing.assert_array_equal(a.nxt, b.nxt)


@pytest.mark.parametrize("kind,vl", LAYOUT_CASES)
def test_collide_matches_oracle_and_scalar(kind, vl, lattice_16x32):
    want = oracle_collide(lattice_16x32, 1.3)
    s = state_for(kind, vl, lattice_16x32)
    s.nxt[...] = s.prv
    collide(s, 1.3, workers=3)
    np.testing.assert_array_equal(s.canonical(), want)
    if (kind, vl) in ((Kind.AOS, 1), (Kind.CAOSOA, 8)):
        r = state_for(kind, vl, lattice_16x32)
        r.nxt[...] = r.prv
        kernels.collide_scalar(r, 1.3)
        np.testing.assert_array_equal(r.canonical(), want)


def _uniform_fixed_point_state(kind, vl, model, lx=8, ly=16):
    f = equilibrium_fixed_point(Macros(1.0, 0.05, 0.0, model.t0), model)
    return state_for(kind, vl, np.tile(f, (lx, ly, 1)))


@pytest.mark.parametrize("kind,vl", LAYOUT_CASES)
def test_collide_global_equilibrium_unchanged(kind, vl, model):
    s = _uniform_fixed_point_state(kind, vl, model)
    before = s.canonical()
    s.nxt[...] = s.prv
    collide(s, 1.7)
    np.testing.assert_array_equal(s.canonical(), before)


def test_uniform_equilibrium_invariant_under_steps(model):
    s = _uniform_fixed_point_state(Kind.CAOSOA, 4, model)
    before = s.canonical()
    for _ in range(25):
        step(s, 1.2)
    np.testing.assert_array_equal(s.canonical(), before)
    assert s.time_step == 25


def test_step_conserves_mass(lattice_16x32):
    s = state_for(Kind.SOA, 1, lattice_16x32)
    m0 = lattice_16x32.sum()
    step(s, 1.5)
    assert abs(s.canonical().sum() - m0) / m0 < 1e-11


@pytest.mark.parametrize("schedule", ["dynamic", "static"])
def test_thread_count_independence(schedule, lattice_16x32):
    ref = state_for(Kind.CAOSOA, 8, lattice_16x32)
    kernels.run(ref, 3, 1.1)
    for workers in (2, 4, 5):
        s = state_for(Kind.CAOSOA, 8, lattice_16x32)
        kernels.run(s, 3, 1.1, workers=workers, schedule=schedule)
        assert s.dumps() == ref.dumps()


def test_layout_independence_commutes(lattice_16x32):
    a = descriptor(Kind.AOS, 16, 32)
    b = descriptor(Kind.CSOA, 16, 32, 4)
    s = state_for(Kind.AOS, 1, lattice_16x32)
    left = s.converted(b)
    step(left, 0.9)
    step(s, 0.9)
    right = s.converted(b)
    assert left.dumps() == right.dumps()
    assert right.converted(a).dumps() == s.dumps()


def test_unknown_schedule(lattice_16x32):
    s = state_for(Kind.AOS, 1, lattice_16x32)
    with pytest.raises(ValueError):
        step(s, 1.0, workers=2, schedule="guided")


@pytest.mark.parametrize("omega", [0.3, 1.0, 1.9])
def test_no_nan_over_1000_steps(omega, model):
    lx, ly = 8, 16
    X, Y = np.meshgrid(np.arange(lx), np.arange(ly), indexing="ij")
    m = Macros(
        1 + 0.05 * np.sin(2 * np.pi * X / lx),
        0.07 * np.sin(2 * np.pi * Y / ly),
        0.07 * np.cos(2 * np.pi * X / lx),
        model.t0 * (1 + 0.2 * np.cos(2 * np.pi * (X / lx + Y / ly))),
    )
    s = state_for(Kind.CSOA, 2, np.moveaxis(equilibrium(m, model), 0, -1))
    kernels.run(s, 1000, omega)
    out = s.canonical()
    assert np.isfinite(out).all()
    assert (np.asarray(macros([out[:, :, p] for p in range(37)], model).rho) > 0).all()


def test_random_state_is_physical(model):
    arr = random_state(8, 16, seed=3)
    m = macros([arr[:, :, p] for p in range(37)], model)
    assert (m.rho > 0).all() and (m.temp > 0).all()
