"""Numerical checks of the heat equation with inverse-square potential on corner domains."""
from .model import CornerParams, SeparatedFunction, hardy_constant
from .radial import RadialGrid, assemble

__version__ = "0.1.0"

__all__ = ["CornerParams", "SeparatedFunction", "RadialGrid", "assemble", "hardy_constant", "__version__"]
