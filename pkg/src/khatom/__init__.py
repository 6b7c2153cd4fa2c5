"""khatom: 1D strong-field quantum dynamics in and out of the oscillating frame.

Split-operator TDSE propagation of a model atom in a strong laser pulse,
Kramers-Henneberger (KH) frame transformations, cycle-averaged KH potentials
and their bound states, Wigner phase-space analysis, and classical phase
portraits. All quantities are in atomic units.
"""

__version__ = "0.1.0"

from .core import SpatialGrid, TimeGrid, WaveFunction, KhatomError

__all__ = ["SpatialGrid", "TimeGrid", "WaveFunction", "KhatomError", "__version__"]
