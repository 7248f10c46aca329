"""Topology optimization with relaxed topological derivatives.

Closed-form cutting/bisection optimizer in pseudo-time, Laplacian smoothing,
bi-material mixed finite elements, marching-simplex geometry and a
level-set baseline.
"""

from .elasticity import Material
from .mesh import DesignField, ScalarField, StructuredGrid
from .problems import PRESETS, TopologyProblem

__version__ = "0.1.0"

__all__ = ["DesignField", "Material", "PRESETS", "ScalarField", "StructuredGrid",
           "TopologyProblem", "__version__"]
