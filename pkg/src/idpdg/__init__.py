"""Invariant-domain-preserving limiting for modal DG and DGSEM discretizations of compressible Euler."""

from .discretization import FieldState, Scheme, build_operator
from .idp import Floors, LimiterMode, SmoothnessGate
from .mesh import BoundaryTag, QuadMeshSpec, build_quad_mesh, build_segment_mesh, ramp_spec
from .physics import DEFAULT_GAS, GasModel, InadmissibleStateError, conserved, primitive
from .timeloop import Solver, SolverConfig

__all__ = [
    "BoundaryTag", "DEFAULT_GAS", "FieldState", "Floors", "GasModel", "InadmissibleStateError",
    "LimiterMode", "QuadMeshSpec", "Scheme", "SmoothnessGate", "Solver", "SolverConfig",
    "build_operator", "build_quad_mesh", "build_segment_mesh", "conserved", "primitive", "ramp_spec",
]
