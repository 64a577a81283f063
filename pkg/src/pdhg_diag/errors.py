"""Exception types shared across the solver."""


class DimensionMismatch(ValueError):
    """Operands have incompatible shapes."""


class NotPositiveDefinite(ValueError):
    """A matrix required to be symmetric positive definite is not."""


class StepSizeTooLarge(ValueError):
    """sigma*tau*||A||^2 >= 1, so the iteration map loses its contraction metric."""

    def __init__(self, product):
        self.product = float(product)
        super().__init__(
            "step sizes rejected: sigma*tau*||A||^2 = %.6g >= 1" % self.product
        )


class NonFiniteIterate(RuntimeError):
    """NaN or Inf appeared in the iterate sequence (bad prox oracle or data)."""

    def __init__(self, iteration):
        self.iteration = int(iteration)
        super().__init__("non-finite iterate at iteration %d" % self.iteration)


class EmptyTrace(ValueError):
    """The trace does not hold enough history for the requested estimate."""


class NonPolyhedralCone(ValueError):
    """Operation requires a polyhedral cone (orthants, zero, free, products)."""


class CertificateValidationFailed(RuntimeError):
    """Displacement block is nonzero but its certificate residuals exceed tolerance.

    Usually means the iteration was stopped before the difference sequence
    stabilized; rerun with a larger iteration budget.
    """

    def __init__(self, kind, residuals):
        self.kind = kind
        self.residuals = dict(residuals)
        super().__init__(
            "certificate %r failed validation: %s" % (kind, self.residuals)
        )


class SingularShapeMatrix(ValueError):
    """An ellipsoid shape matrix is numerically singular."""

    def __init__(self, index, side=None):
        self.index = int(index)
        self.side = side
        where = "" if side is None else " on side %s" % side
        super().__init__("singular shape matrix at index %d%s" % (self.index, where))


class ZeroNormal(ValueError):
    """A separating hyperplane normal must be nonzero."""
