"""bandflow: separable mechanics on the sphere, polynomial reductions of the
KdV flow, and finite-band Hill spectra, with every link cross-verified
numerically (independent Cartesian oracle, polynomial-identity residuals,
Floquet discriminants, growth exponents)."""

from . import benenti, errors, hill, kdv, poly, separation, systems
from .defaults import DEFAULTS

__all__ = ["poly", "benenti", "separation", "systems", "kdv", "hill",
           "errors", "DEFAULTS"]

__version__ = "0.1.0"
