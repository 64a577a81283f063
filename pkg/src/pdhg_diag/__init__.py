"""PDHG solver for QP and conic programs with infeasibility diagnostics.

The solver runs the plain primal-dual hybrid gradient iteration and, instead
of failing silently on infeasible or unbounded instances, estimates the
infimal displacement vector from the iterate differences and converts it into
validated certificates: Farkas-type rays/multipliers for quadratic programs,
and strict separating hyperplanes for the ellipsoid separation problem.
"""

from . import cones, conic, diagnostics, ellipsoid, linalg, qp
from .core import (Iterate, IterateTrace, MetricM, SaddleProblem, apply_T,
                   apply_shifted_T, iterate, m_inner, validate_steps)
from .errors import (CertificateValidationFailed, DimensionMismatch,
                     EmptyTrace, NonFiniteIterate, NonPolyhedralCone,
                     NotPositiveDefinite, SingularShapeMatrix,
                     StepSizeTooLarge, ZeroNormal)

__version__ = "0.1.0"

__all__ = [
    "cones", "conic", "diagnostics", "ellipsoid", "linalg", "qp",
    "Iterate", "IterateTrace", "MetricM", "SaddleProblem",
    "apply_T", "apply_shifted_T", "iterate", "m_inner", "validate_steps",
    "CertificateValidationFailed", "DimensionMismatch", "EmptyTrace",
    "NonFiniteIterate", "NonPolyhedralCone", "NotPositiveDefinite",
    "SingularShapeMatrix", "StepSizeTooLarge", "ZeroNormal",
    "__version__",
]
