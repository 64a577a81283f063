"""Closed convex cone descriptors with Euclidean projections.

Projection onto the polar cone is obtained from the Moreau decomposition
z = P_K(z) + P_{K_polar}(z) with the two parts orthogonal, so only the cone
projection itself is implemented per variant.

The second-order cone uses the layout (t, x): the first coordinate is the
scalar bound, the remaining dim-1 coordinates the block, and the cone is
{(t, x) : ||x|| <= t}.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonPolyhedralCone


class Cone:
    """Base descriptor. Subclasses implement project()."""

    dim = 0

    def project(self, z):
        raise NotImplementedError

    def _check(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,):
            raise DimensionMismatch(
                "cone dim %d, point shape %s" % (self.dim, z.shape)
            )
        return z


@dataclass(frozen=True)
class Zero(Cone):
    dim: int

    def project(self, z):
        self._check(z)
        return np.zeros(self.dim)


@dataclass(frozen=True)
class Free(Cone):
    dim: int

    def project(self, z):
        return self._check(z).copy()


@dataclass(frozen=True)
class NonnegOrthant(Cone):
    dim: int

    def project(self, z):
        return np.maximum(self._check(z), 0.0)


@dataclass(frozen=True)
class NonposOrthant(Cone):
    dim: int

    def project(self, z):
        return np.minimum(self._check(z), 0.0)


@dataclass(frozen=True)
class SecondOrder(Cone):
    """{(t, x) in R^dim : ||x|| <= t}; dim >= 1.  dim == 1 degenerates to R_+."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionMismatch("SecondOrder cone needs dim >= 1")

    def project(self, z):
        z = self._check(z)
        if self.dim == 1:
            return np.maximum(z, 0.0)
        t, x = z[0], z[1:]
        nx = np.linalg.norm(x)
        if nx <= t:
            return z.copy()
        if nx <= -t:
            # includes the boundary t == -||x||, where the projection is the apex
            return np.zeros(self.dim)
        alpha = 0.5 * (nx + t)
        out = np.empty(self.dim)
        out[0] = alpha
        out[1:] = (alpha / nx) * x
        return out


@dataclass(frozen=True)
class Product(Cone):
    factors: tuple = field(default_factory=tuple)

    def __init__(self, factors):
        object.__setattr__(self, "factors", tuple(factors))

    @property
    def dim(self):
        return sum(f.dim for f in self.factors)

    def project(self, z):
        z = self._check(z)
        out = np.empty(self.dim)
        off = 0
        for f in self.factors:
            out[off:off + f.dim] = f.project(z[off:off + f.dim])
            off += f.dim
        return out


@dataclass(frozen=True)
class ConeMembershipReport:
    in_cone: bool
    distance: float


def project(cone, z):
    """Euclidean projection P_K(z)."""
    return cone.project(z)


def project_polar(cone, z):
    """Projection onto the polar cone via the Moreau decomposition: z - P_K(z)."""
    z = np.asarray(z, dtype=float)
    return z - cone.project(z)


def membership(cone, z, tol):
    """Distance-to-cone membership test; tolerance is caller-supplied."""
    if tol < 0:
        raise ValueError("membership tolerance must be >= 0")
    z = np.asarray(z, dtype=float)
    dist = float(np.linalg.norm(z - cone.project(z)))
    return ConeMembershipReport(in_cone=dist <= tol, distance=dist)


def polar_distance(cone, z):
    """Distance from z to the polar cone: ||P_K(z)|| by Moreau orthogonality."""
    return float(np.linalg.norm(cone.project(z)))


def is_polyhedral(cone):
    if isinstance(cone, (Zero, Free, NonnegOrthant, NonposOrthant)):
        return True
    if isinstance(cone, SecondOrder):
        return cone.dim == 1
    if isinstance(cone, Product):
        return all(is_polyhedral(f) for f in cone.factors)
    return False


def polar(cone):
    """Structural polar for polyhedral variants (orthants swap, zero <-> free)."""
    if isinstance(cone, Zero):
        return Free(cone.dim)
    if isinstance(cone, Free):
        return Zero(cone.dim)
    if isinstance(cone, NonnegOrthant):
        return NonposOrthant(cone.dim)
    if isinstance(cone, NonposOrthant):
        return NonnegOrthant(cone.dim)
    if isinstance(cone, SecondOrder) and cone.dim == 1:
        return NonposOrthant(1)
    if isinstance(cone, Product):
        return Product(tuple(polar(f) for f in cone.factors))
    raise NonPolyhedralCone("no structural polar for %r" % (cone,))


def iter_blocks(cone):
    """Yield (offset, factor) pairs, flattening Product cones one level."""
    if isinstance(cone, Product):
        off = 0
        for f in cone.factors:
            yield off, f
            off += f.dim
    else:
        yield 0, cone
