"""Full-order Taylor-Hood model of the parametrized channel."""

from .mesh import Mesh, build_mesh
from .model import (
    NAVIER_STOKES,
    REFERENCE_PARAMETER,
    STOKES,
    AffineGeometry,
    AffineModel,
    assemble_affine,
    assemble_direct,
    lifting,
    seminorm,
)
from .solvers import TruthSolution, solve_navier_stokes, solve_stokes

__all__ = [
    "Mesh", "build_mesh", "AffineGeometry", "AffineModel", "assemble_affine",
    "assemble_direct", "lifting", "seminorm", "TruthSolution", "solve_stokes",
    "solve_navier_stokes", "STOKES", "NAVIER_STOKES", "REFERENCE_PARAMETER",
]
