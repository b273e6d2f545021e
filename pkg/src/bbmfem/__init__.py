"""Energy-conservative mixed Galerkin / relaxation Runge--Kutta solver for the
BBM-BBM system, with solitary-wave generation and error diagnostics."""

__version__ = "0.1.0"

from .errors import NumericalFailure
from .mesh import Bc, ConfigurationError, FemFunction, FemSpace, UniformMesh, build_space
from .semidisc import BoundaryKind, MixedState, SchemeKind, Semidiscretization
from .timeint import ButcherTableau, Integrator, RelaxationConfig, RelaxationError, classic_rk4

__all__ = [
    "Bc", "BoundaryKind", "ButcherTableau", "ConfigurationError", "FemFunction", "FemSpace",
    "Integrator", "MixedState", "NumericalFailure", "RelaxationConfig", "RelaxationError",
    "SchemeKind", "Semidiscretization", "UniformMesh", "build_space", "classic_rk4",
]
