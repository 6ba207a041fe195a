"""Non-Hermitian parent Hamiltonians for uniform matrix product states."""

__version__ = "0.1.0"

from .linalg import (  # noqa: E402
    DegenerateEigenvalueError,
    EigenSolverError,
    LinalgError,
    SingularMatrixError,
)
from .mps import StatePair, UniformMPS, asymmetric_aklt, left_partner  # noqa: E402
from .parent import LocalProjector, NoParentHamiltonianError, build_projector  # noqa: E402

__all__ = [
    "__version__",
    "DegenerateEigenvalueError",
    "EigenSolverError",
    "LinalgError",
    "SingularMatrixError",
    "StatePair",
    "UniformMPS",
    "asymmetric_aklt",
    "left_partner",
    "LocalProjector",
    "NoParentHamiltonianError",
    "build_projector",
]
