"""Boundary layers of hyperbolic relaxation systems at characteristic boundaries."""

from .config import RunConfig, load_config, print_config
from .errors import RelaxBCError
from .expansion import build_expansion, compute_residual, convergence_study
from .kreiss import certify_gkc, gkc_ratio
from .layer import build_layer_algebra
from .reduced import derive_reduced_matrices, solve_boundary_traces
from .relaxation import solve_relaxation
from .system import (RelaxationSystem, classify, normalize,
                     validate_structural_stability)

__version__ = "0.1.0"

__all__ = [
    "RelaxBCError", "RelaxationSystem", "RunConfig", "build_expansion",
    "build_layer_algebra", "certify_gkc", "classify", "compute_residual",
    "convergence_study", "derive_reduced_matrices", "gkc_ratio", "load_config",
    "normalize", "print_config", "solve_boundary_traces", "solve_relaxation",
    "validate_structural_stability",
]
