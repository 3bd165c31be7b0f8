"""Driven two-level atom with collisional and laser phase noise."""

from .model import AtomState, DensityMatrix, DressedDecomposition, SystemParams

__all__ = ["AtomState", "DensityMatrix", "DressedDecomposition", "SystemParams"]
__version__ = "0.1.0"
