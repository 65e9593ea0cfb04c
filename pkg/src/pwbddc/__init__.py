"""Adaptive BDDC solvers for plane-wave least-squares Helmholtz systems."""
from .assembly import assemble_global, wave_directions
from .bddc import BDDCLevel, build_level, pcg
from .coarse import build_coarse_space, glob_eigen_data
from .config import CaseConfig
from .errors import (ConfigError, EigenSolverFailure, MissingBoundaryData,
                     NoValidFactorization, NonHermitianDetected, PWBDDCError,
                     SingularDeluxeSum, SingularEliminationBlock, SingularInterior,
                     SizeCapExceeded)
from .estimator import AdaptiveBDDC, PlaneWaveHelmholtz
from .level import LevelProblem, fine_level
from .mesh import MeshConfig, build_mesh, classify_globs

__version__ = "0.1.0"

__all__ = [
    "AdaptiveBDDC", "BDDCLevel", "CaseConfig", "ConfigError", "EigenSolverFailure",
    "LevelProblem", "MeshConfig", "MissingBoundaryData", "NoValidFactorization",
    "NonHermitianDetected", "PWBDDCError", "PlaneWaveHelmholtz", "SingularDeluxeSum",
    "SingularEliminationBlock", "SingularInterior", "SizeCapExceeded", "assemble_global",
    "build_coarse_space", "build_level", "build_mesh", "classify_globs", "fine_level",
    "glob_eigen_data", "pcg", "wave_directions",
]
