"""Index maps for the AoS, SoA, CSoA and CAoSoA lattice layouts.

Storage always carries ghost sites: ``hx`` ghost columns on each side in x
and ``hy`` ghost rows above and below every lane strip in y.  For AoS/SoA
there is one strip (the whole column); for the clustered layouts there are
``vl`` strips of height ``ly // vl`` and lane ``k`` of a cluster holds the
site of strip ``k``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .model import NPOP

ALIGNMENT = 64
DUMP_MAGIC = b"D2Q37LAT"
_HEADER = struct.Struct("<8sQQQ")


class Kind(str, Enum):
    AOS = "AoS"
    SOA = "SoA"
    CSOA = "CSoA"
    CAOSOA = "CAoSoA"

    @classmethod
    def parse(cls, name: str) -> "Kind":
        for k in cls:
            if k.value.lower() == str(name).lower():
                return k
        raise ValueError(f"unknown layout {name!r}; expected one of {[k.value for k in cls]}")

    @property
    def clustered(self) -> bool:
        return self in (Kind.CSOA, Kind.CAOSOA)

    @property
    def site_major(self) -> bool:
        # populations of one site (or one cluster slot) are adjacent
        return self in (Kind.AOS, Kind.CAOSOA)


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class LatticeGeometry:
    lx: int
    ly: int
    hx: int = 3
    hy: int = 3
    vl: int = 8

    def __post_init__(self):
        if self.lx < 1 or self.ly < 1:
            raise GeometryError(f"lattice extents must be positive, got {self.lx}x{self.ly}")
        if self.hx < 0 or self.hy < 0:
            raise GeometryError("halo widths must be non-negative")
        if self.vl < 1 or self.vl & (self.vl - 1):
            raise GeometryError(f"vl must be a power of two, got {self.vl}")
        if self.ly % self.vl:
            raise GeometryError(f"ly divisible by vl is required (ly={self.ly}, vl={self.vl})")

    @property
    def strip(self) -> int:
        return self.ly // self.vl


@dataclass(frozen=True)
class SiteCoord:
    x: int
    y: int
    p: int


@dataclass(frozen=True)
class LayoutDescriptor:
    kind: Kind
    geometry: LatticeGeometry
    alignment: int = ALIGNMENT
    npop: int = NPOP

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind.parse(self.kind) if not isinstance(self.kind, Kind) else self.kind)

    # -- derived sizes -------------------------------------------------------
    @property
    def lanes(self) -> int:
        return self.geometry.vl if self.kind.clustered else 1

    @property
    def strip(self) -> int:
        return self.geometry.ly // self.lanes

    @property
    def padded_height(self) -> int:
        return self.strip + 2 * self.geometry.hy

    @property
    def padded_width(self) -> int:
        return self.geometry.lx + 2 * self.geometry.hx

    @property
    def n_units(self) -> int:
        """Number of clusters (or plain elements for AoS/SoA)."""
        return self.padded_width * self.padded_height * self.npop

    @property
    def n_elements(self) -> int:
        return self.n_units * self.lanes

    @property
    def natural_shape(self) -> tuple[int, ...]:
        X, S, P, V = self.padded_width, self.padded_height, self.npop, self.lanes
        return {
            Kind.AOS: (X, S, P),
            Kind.SOA: (P, X, S),
            Kind.CSOA: (P, X, S, V),
            Kind.CAOSOA: (X, S, P, V),
        }[self.kind]

    # strides in units (clusters, or elements when lanes == 1)
    @property
    def site_stride(self) -> int:
        return self.npop if self.kind.site_major else 1

    @property
    def column_stride(self) -> int:
        return self.site_stride * self.padded_height

    @property
    def population_stride(self) -> int:
        return 1 if self.kind.site_major else self.padded_width * self.padded_height

    def unit_base(self, p: int, x: int) -> int:
        """Unit index of the first physical site of column ``x`` (lane strip row 0)."""
        g = self.geometry
        return p * self.population_stride + (x + g.hx) * self.column_stride + g.hy * self.site_stride

    # -- addressing ----------------------------------------------------------
    def locate(self, c: SiteCoord) -> tuple[int, int]:
        """(unit index, lane) of a physical coordinate."""
        return {
            Kind.AOS: lambda: (addr_aos(c, self.geometry, self.npop), 0),
            Kind.SOA: lambda: (addr_soa(c, self.geometry, self.npop), 0),
            Kind.CSOA: lambda: addr_csoa(c, self.geometry, self.npop),
            Kind.CAOSOA: lambda: addr_caosoa(c, self.geometry, self.npop),
        }[self.kind]()

    def address(self, c: SiteCoord) -> int:
        unit, lane = self.locate(c)
        return unit * self.lanes + lane

    # -- views ---------------------------------------------------------------
    def padded_view(self, buf: np.ndarray) -> np.ndarray:
        """Writable 4-D view indexed ``[X, row, p, lane]`` over the whole buffer."""
        nat = buf.reshape(self.natural_shape)
        if self.kind is Kind.AOS:
            return nat[..., None]
        if self.kind is Kind.SOA:
            return nat.transpose(1, 2, 0)[..., None]
        if self.kind is Kind.CSOA:
            return nat.transpose(1, 2, 0, 3)
        return nat

    def interior(self, buf: np.ndarray, x0: int = 0, x1: int | None = None) -> np.ndarray:
        """View ``[x, row, p, lane]`` of the physical sites in columns ``x0:x1``."""
        g = self.geometry
        x1 = g.lx if x1 is None else x1
        return self.padded_view(buf)[g.hx + x0 : g.hx + x1, g.hy : g.hy + self.strip]

    def allocate(self) -> np.ndarray:
        return aligned_zeros(self.n_elements, self.alignment)

    def offsets(self, velocities) -> "OffsetTable":
        """Pull offsets: population ``p`` reads the site ``-c_p`` away."""
        vel = np.asarray(velocities)
        off = tuple(int(-(cx * self.column_stride + cy * self.site_stride)) for cx, cy in vel)
        return OffsetTable(off)


@dataclass(frozen=True)
class OffsetTable:
    off: tuple[int, ...]

    def __getitem__(self, p):
        return self.off[p]

    def __len__(self):
        return len(self.off)


def _check(c: SiteCoord, g: LatticeGeometry, npop: int) -> None:
    if not (0 <= c.x < g.lx and 0 <= c.y < g.ly and 0 <= c.p < npop):
        raise IndexError(f"coordinate {c} outside {g.lx}x{g.ly}x{npop}")


def addr_aos(c: SiteCoord, g: LatticeGeometry, npop: int = NPOP) -> int:
    _check(c, g, npop)
    return ((c.x + g.hx) * (g.ly + 2 * g.hy) + (c.y + g.hy)) * npop + c.p


def addr_soa(c: SiteCoord, g: LatticeGeometry, npop: int = NPOP) -> int:
    _check(c, g, npop)
    plane = (g.lx + 2 * g.hx) * (g.ly + 2 * g.hy)
    return c.p * plane + (c.x + g.hx) * (g.ly + 2 * g.hy) + (c.y + g.hy)


def addr_csoa(c: SiteCoord, g: LatticeGeometry, npop: int = NPOP) -> tuple[int, int]:
    _check(c, g, npop)
    strip = g.strip
    sy = strip + 2 * g.hy
    lane, j = divmod(c.y, strip)
    cplane = (g.lx + 2 * g.hx) * sy
    return c.p * cplane + (c.x + g.hx) * sy + j + g.hy, lane


def addr_caosoa(c: SiteCoord, g: LatticeGeometry, npop: int = NPOP) -> tuple[int, int]:
    _check(c, g, npop)
    strip = g.strip
    sy = strip + 2 * g.hy
    lane, j = divmod(c.y, strip)
    return ((c.x + g.hx) * sy + j + g.hy) * npop + c.p, lane


def aligned_zeros(n: int, alignment: int = ALIGNMENT) -> np.ndarray:
    """Zeroed float64 array of length ``n`` whose data starts on an ``alignment`` boundary."""
    raw = np.zeros(n * 8 + alignment, dtype=np.uint8)
    shift = (-raw.ctypes.data) % alignment
    out = raw[shift : shift + n * 8].view(np.float64)
    assert out.ctypes.data % alignment == 0
    return out


# -- conversion --------------------------------------------------------------

def to_canonical(buf: np.ndarray, desc: LayoutDescriptor) -> np.ndarray:
    """Copy physical sites into a halo-free ``[x, y, p]`` array."""
    g = desc.geometry
    inner = desc.interior(buf)  # [x, j, p, lane]
    return np.ascontiguousarray(inner.transpose(0, 3, 1, 2)).reshape(g.lx, g.ly, desc.npop)


def from_canonical(arr: np.ndarray, desc: LayoutDescriptor, out: np.ndarray | None = None) -> np.ndarray:
    g = desc.geometry
    arr = np.asarray(arr, dtype=np.float64)
    if arr.shape != (g.lx, g.ly, desc.npop):
        raise GeometryError(f"array shape {arr.shape} does not match {(g.lx, g.ly, desc.npop)}")
    if out is None:
        out = desc.allocate()
    desc.interior(out)[...] = arr.reshape(g.lx, desc.lanes, desc.strip, desc.npop).transpose(0, 2, 3, 1)
    return out


def convert(buf: np.ndarray, src: LayoutDescriptor, dst: LayoutDescriptor) -> np.ndarray:
    """Re-store a lattice buffer in another layout; values move bitwise."""
    gs, gd = src.geometry, dst.geometry
    if (gs.lx, gs.ly, src.npop) != (gd.lx, gd.ly, dst.npop):
        raise GeometryError(
            f"geometry mismatch: {gs.lx}x{gs.ly}x{src.npop} vs {gd.lx}x{gd.ly}x{dst.npop}"
        )
    if src == dst:
        out = dst.allocate()
        out[...] = buf
        return out
    return from_canonical(to_canonical(buf, src), dst)


# -- dump format -------------------------------------------------------------

def dumps(arr: np.ndarray) -> bytes:
    """Serialize a canonical ``[x, y, p]`` lattice: header then SoA-ordered float64."""
    lx, ly, npop = arr.shape
    body = np.ascontiguousarray(np.asarray(arr, dtype="<f8").transpose(2, 0, 1)).tobytes()
    return _HEADER.pack(DUMP_MAGIC, lx, ly, npop) + body


def loads(data: bytes) -> np.ndarray:
    magic, lx, ly, npop = _HEADER.unpack_from(data)
    if magic != DUMP_MAGIC:
        raise ValueError("not a lattice dump (bad magic)")
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if body.size != lx * ly * npop:
        raise ValueError(f"dump body has {body.size} values, header promises {lx * ly * npop}")
    return body.reshape(npop, lx, ly).transpose(1, 2, 0).astype(np.float64)


def dump(arr: np.ndarray, path) -> None:
    Path(path).write_bytes(dumps(arr))


def load(path) -> np.ndarray:
    return loads(Path(path).read_bytes())
