"""Once-reinforced random walk (ORRW) toolkit.

Monte Carlo simulation and exact evaluation for the ORRW on rarely-splitting
trees: walk kernels, finite-subtree excursions, ruin products and escape
bounds, inhomogeneous branching-process survival estimates, and a CLI for
reproducible seeded experiments.
"""

__version__ = "0.1.0"

from .errors import DomainError
from ._kernels import USING_NUMBA

__all__ = ["DomainError", "USING_NUMBA", "__version__"]
