"""eulerlab: a desk-scale laboratory for 2D incompressible flow, passive
mixing, 1D blow-up models, and self-similar profile solving."""

__version__ = "0.1.0"

from .grids import Grid1, Grid2
from .fields import SpectralField1, SpectralField2, VectorField2

__all__ = [
    "Grid1",
    "Grid2",
    "SpectralField1",
    "SpectralField2",
    "VectorField2",
    "__version__",
]
