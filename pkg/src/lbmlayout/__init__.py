"""D2Q37 lattice Boltzmann kernels over four interchangeable memory layouts."""
from .layout import Kind, LatticeGeometry, LayoutDescriptor, SiteCoord
from .kernels import LatticeState, collide, halo_exchange, propagate, step
from .model import Macros, VelocityModel, d2q37, equilibrium, macros

__all__ = [
    "Kind",
    "LatticeGeometry",
    "LayoutDescriptor",
    "LatticeState",
    "Macros",
    "SiteCoord",
    "VelocityModel",
    "collide",
    "d2q37",
    "equilibrium",
    "halo_exchange",
    "macros",
    "propagate",
    "step",
]
__version__ = "0.1.0"
