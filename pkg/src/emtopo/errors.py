"""Exception and warning types shared across the package."""


class EmtopoError(Exception):
    """Base class for all errors raised by emtopo."""


class NonHermitianField(EmtopoError):
    """Weight coefficients violate What(-G) = What(G)^dagger beyond tolerance."""


class MalformedCoefficients(EmtopoError):
    """A weight coefficient is not a 6x6 complex matrix (or file entry is broken)."""


class AmbiguousClass(EmtopoError):
    """Detected symmetry set matches none of the four media rows."""


class SingularBasis(EmtopoError):
    """Lattice basis vectors are linearly dependent."""


class EmptySet(EmtopoError):
    """Plane-wave cutoff admits only G = 0 where a non-trivial set was required."""


class DimensionMismatch(EmtopoError):
    """Operands live in fiber spaces of different sizes."""


class SolverFailure(EmtopoError):
    """The dense eigensolver did not converge."""


class IndefiniteWeight(SolverFailure):
    """Cholesky factorization of the weight matrix failed (weight not positive definite)."""


class DegenerateGap(EmtopoError):
    """An eigenvalue sits between zero_tol and 10*zero_tol; kernel membership is ambiguous."""


class SingularLink(EmtopoError):
    """A link overlap determinant fell below link_tol (grid too coarse or gap closing)."""


class NotConverged(EmtopoError):
    """Chern integrality residual exceeds the acceptance threshold."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class QuadratureUnderResolved(EmtopoError):
    """Doubling the Duhamel quadrature changed the result beyond tolerance."""


class NotRealField(EmtopoError):
    """An operation requiring a real field configuration received a complex one."""


class CutoffMismatch(UserWarning):
    """Weight coefficients extend beyond the plane-wave difference set (truncated)."""
