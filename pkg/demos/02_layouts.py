# Four ways of storing the same lattice, and where one population lands in each.

import numpy as np

from lbmlayout import Kind, LatticeGeometry, LayoutDescriptor, SiteCoord
from lbmlayout.layout import convert, from_canonical, to_canonical

geom = LatticeGeometry(lx=4, ly=16, hx=3, hy=3, vl=4)
site = SiteCoord(x=1, y=9, p=5)

for kind in Kind:
    vl = geom.vl if kind.clustered else 1
    desc = LayoutDescriptor(kind, LatticeGeometry(4, 16, vl=vl))
    print(f"{kind.value:7s} buffer shape {desc.natural_shape}  site {site} -> element {desc.address(site)}")

# In the clustered layouts lane k owns the strip y in [k*ly/vl, (k+1)*ly/vl):
# neighbouring lanes of one cluster hold sites ly/vl apart
desc = LayoutDescriptor(Kind.CSOA, geom)
print("strip height:", desc.strip)
print("lanes of the cluster holding (1, 9):",
      [desc.locate(SiteCoord(1, 9 % desc.strip + k * desc.strip, 5)) for k in range(desc.lanes)])

# converting between layouts is lossless
rng = np.random.default_rng(0)
lattice = rng.uniform(size=(4, 16, 37))
aos = LayoutDescriptor(Kind.AOS, LatticeGeometry(4, 16, vl=1))
caosoa = LayoutDescriptor(Kind.CAOSOA, geom)
buf = from_canonical(lattice, aos)
moved = convert(buf, aos, caosoa)
assert (to_canonical(moved, caosoa) == lattice).all()
print("AoS -> CAoSoA -> canonical round trip is exact")
