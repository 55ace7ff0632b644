"""Concave least-squares regression: projections, localized widths, truncation,
metric entropy and Monte-Carlo risk experiments."""

__version__ = "0.1.0"

from .cones import (ConeKind, ConeSpec, affine_basis, is_member, mode_index, project_affine,
                    range_V, second_differences)
from .errors import (ConfigError, DomainError, FitError, NoCrossingError, ResourceError,
                     SolverError)
from .projection import (BallPath, ProjectionResult, kkt_residual, max_linear_over_ball, project,
                         project_ortho_affine)

__all__ = [
    "BallPath", "ConeKind", "ConeSpec", "ConfigError", "DomainError", "FitError",
    "NoCrossingError", "ProjectionResult", "ResourceError", "SolverError", "affine_basis",
    "is_member", "kkt_residual", "max_linear_over_ball", "mode_index", "project",
    "project_affine", "project_ortho_affine", "range_V", "second_differences",
]
