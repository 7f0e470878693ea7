import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lbmlayout import layout as lay
from lbmlayout.layout import (
    GeometryError,
    Kind,
    LatticeGeometry,
    LayoutDescriptor,
    SiteCoord,
    addr_aos,
    addr_caosoa,
    addr_csoa,
    addr_soa,
)

from .conftest import LAYOUT_CASES, descriptor


def flat0(lx, ly, vl=1):
    return LatticeGeometry(lx, ly, hx=0, hy=0, vl=vl)


def all_coords(lx, ly, npop):
    for x, y, p in itertools.product(range(lx), range(ly), range(npop)):
        yield SiteCoord(x, y, p)


def test_geometry_constraints():
    assert LatticeGeometry(64, 8192, vl=8).strip == 1024
    with pytest.raises(GeometryError, match="ly divisible by vl"):
        LatticeGeometry(4, 100, vl=8)
    with pytest.raises(GeometryError):
        LatticeGeometry(4, 96, vl=3)
    with pytest.raises(GeometryError):
        LatticeGeometry(0, 8)


def test_addr_aos_examples():
    g = flat0(2, 8)
    assert addr_aos(SiteCoord(0, 0, 1), g) == 1
    assert addr_aos(SiteCoord(0, 1, 0), g) == 37
    got = sorted(addr_aos(c, g) for c in all_coords(2, 8, 37))
    assert got == list(range(2 * 8 * 37))


def test_addr_soa_examples():
    g = flat0(2, 8)
    assert addr_soa(SiteCoord(0, 3, 0), g) == 3
    assert addr_soa(SiteCoord(0, 0, 1), g) == 16
    got = sorted(addr_soa(c, g) for c in all_coords(2, 8, 37))
    assert got == list(range(592))


def test_addr_csoa_cluster_pairs_sites_a_strip_apart():
    g = flat0(2, 8, vl=2)
    c1, l1 = addr_csoa(SiteCoord(1, 1, 3), g)
    c5, l5 = addr_csoa(SiteCoord(1, 5, 3), g)
    assert c1 == c5 and (l1, l5) == (0, 1)


def test_addr_csoa_vl1_is_soa():
    g = LatticeGeometry(3, 12, vl=1)
    for c in all_coords(3, 12, 37):
        cl, lane = addr_csoa(c, g)
        assert lane == 0 and cl == addr_soa(c, g)


def test_addr_caosoa_vl1_is_aos():
    g = LatticeGeometry(3, 12, vl=1)
    for c in all_coords(3, 12, 37):
        cl, lane = addr_caosoa(c, g)
        assert lane == 0 and cl == addr_aos(c, g)


def test_caosoa_two_population_memory_order():
    # 2x8 lattice, two populations, vl=2: per cluster slot j the clusters of
    # population 0 and 1 follow each other; lanes hold y and y + 4
    g = flat0(2, 8, vl=2)
    order = {}
    for c in all_coords(2, 8, 2):
        cl, lane = addr_caosoa(c, g, npop=2)
        order[cl * 2 + lane] = (c.x, c.y, c.p)
    head = [order[i] for i in range(8)]
    assert head == [(0, 0, 0), (0, 4, 0), (0, 0, 1), (0, 4, 1), (0, 1, 0), (0, 5, 0), (0, 1, 1), (0, 5, 1)]


def test_caosoa_populations_of_a_slot_are_contiguous():
    g = LatticeGeometry(4, 16, vl=4)
    for x, y in [(0, 0), (2, 5), (3, 15)]:
        clusters = [addr_caosoa(SiteCoord(x, y, p), g)[0] for p in range(37)]
        assert clusters == list(range(clusters[0], clusters[0] + 37))


@pytest.mark.parametrize("fn", [addr_csoa, addr_caosoa])
def test_clustered_bijective(fn):
    g = LatticeGeometry(4, 16, hx=0, hy=0, vl=4)
    got = sorted(c * 4 + lane for c, lane in (fn(co, g) for co in all_coords(4, 16, 37)))
    assert got == list(range(4 * 16 * 37))


@given(
    kind=st.sampled_from(list(Kind)),
    lx=st.integers(1, 5),
    strip=st.integers(1, 6),
    vl=st.sampled_from([1, 2, 4, 8]),
    hx=st.integers(0, 3),
    hy=st.integers(0, 3),
)
@settings(max_examples=40, deadline=None)
def test_address_injective_with_halos(kind, lx, strip, vl, hx, hy):
    g = LatticeGeometry(lx, strip * vl, hx=hx, hy=hy, vl=vl)
    d = LayoutDescriptor(kind, g)
    addrs = [d.address(c) for c in all_coords(lx, g.ly, 37)]
    assert len(set(addrs)) == len(addrs)
    assert min(addrs) >= 0 and max(addrs) < d.n_elements


def test_out_of_range_coordinate():
    g = LatticeGeometry(4, 16, vl=4)
    for fn in (addr_aos, addr_soa, addr_csoa, addr_caosoa):
        with pytest.raises(IndexError):
            fn(SiteCoord(4, 0, 0), g)
        with pytest.raises(IndexError):
            fn(SiteCoord(0, 0, 37), g)


@pytest.mark.parametrize("kind,vl", LAYOUT_CASES)
def test_cluster_alignment(kind, vl):
    d = descriptor(kind, 8, 64, vl)
    buf = d.allocate()
    assert buf.ctypes.data % 64 == 0
    for c in [SiteCoord(0, 0, 0), SiteCoord(3, 17, 5), SiteCoord(7, 63, 36)]:
        unit, lane = d.locate(c)
        lane0 = unit * d.lanes
        assert lane0 % d.lanes == 0
        if d.lanes * 8 >= 64:
            assert (buf.ctypes.data + lane0 * 8) % 64 == 0


@pytest.mark.parametrize("kind", [Kind.CSOA, Kind.CAOSOA])
def test_cluster_lanes_are_distinct_strips(kind):
    d = descriptor(kind, 4, 32, 4)
    members = {}
    for c in all_coords(4, 32, 37):
        unit, lane = d.locate(c)
        members.setdefault(unit, []).append(c.y)
    for ys in members.values():
        assert len(ys) == 4
        strips = {y // 8 for y in ys}
        assert len(strips) == 4
        assert all(abs(a - b) > 1 for a, b in itertools.combinations(ys, 2))


@pytest.mark.parametrize("kind,vl", LAYOUT_CASES)
def test_canonical_round_trip(kind, vl, lattice_16x32):
    d = descriptor(kind, 16, 32, vl)
    buf = lay.from_canonical(lattice_16x32, d)
    np.testing.assert_array_equal(lay.to_canonical(buf, d), lattice_16x32)
    # the descriptor's scalar addressing agrees with the vectorized views
    for c in [SiteCoord(0, 0, 0), SiteCoord(15, 31, 36), SiteCoord(7, 9, 20)]:
        assert buf[d.address(c)] == lattice_16x32[c.x, c.y, c.p]


def test_convert_identity_and_round_trip(lattice_16x32):
    descs = [descriptor(k, 16, 32, vl) for k, vl in LAYOUT_CASES]
    for a in descs:
        buf = lay.from_canonical(lattice_16x32, a)
        np.testing.assert_array_equal(lay.convert(buf, a, a), buf)
        for b in descs:
            there = lay.convert(buf, a, b)
            back = lay.convert(there, b, a)
            np.testing.assert_array_equal(lay.to_canonical(back, a), lattice_16x32)


def test_convert_aos_to_caosoa_spot_check(lattice_16x32, rng):
    a = descriptor(Kind.AOS, 16, 32)
    b = descriptor(Kind.CAOSOA, 16, 32, 8)
    src = lay.from_canonical(lattice_16x32, a)
    dst = lay.convert(src, a, b)
    for _ in range(100):
        c = SiteCoord(int(rng.integers(16)), int(rng.integers(32)), int(rng.integers(37)))
        assert dst[b.address(c)] == src[addr_aos(c, a.geometry)]


def test_convert_geometry_mismatch(lattice_16x32):
    a = descriptor(Kind.AOS, 16, 32)
    b = descriptor(Kind.SOA, 16, 64)
    with pytest.raises(GeometryError):
        lay.convert(lay.from_canonical(lattice_16x32, a), a, b)


def test_offsets(model):
    d = descriptor(Kind.CSOA, 8, 64, 8)
    off = d.offsets(model.velocities)
    assert len(off) == 37
    assert off[model.index_of(0, 0)] == 0
    assert off[model.index_of(1, 0)] == -d.padded_height
    assert off[model.index_of(0, 1)] == -1
    aos = descriptor(Kind.AOS, 8, 64).offsets(model.velocities)
    assert aos[model.index_of(0, -2)] == 2 * 37


def test_dump_format(tmp_path, lattice_16x32):
    path = tmp_path / "lat.bin"
    lay.dump(lattice_16x32, path)
    raw = path.read_bytes()
    assert len(raw) == 32 + 16 * 32 * 37 * 8
    assert raw[:8] == lay.DUMP_MAGIC
    assert int.from_bytes(raw[8:16], "little") == 16
    assert int.from_bytes(raw[16:24], "little") == 32
    assert int.from_bytes(raw[24:32], "little") == 37
    body = np.frombuffer(raw[32:], dtype="<f8")
    # SoA canonical order: population, then x, then y
    assert body[0] == lattice_16x32[0, 0, 0]
    assert body[1] == lattice_16x32[0, 1, 0]
    assert body[32] == lattice_16x32[1, 0, 0]
    assert body[16 * 32] == lattice_16x32[0, 0, 1]
    np.testing.assert_array_equal(lay.load(path), lattice_16x32)


def test_dump_rejects_bad_magic(lattice_16x32):
    data = bytearray(lay.dumps(lattice_16x32))
    data[0:8] = b"NOTADUMP"
    with pytest.raises(ValueError):
        lay.loads(bytes(data))
