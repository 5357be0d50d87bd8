"""Exception hierarchy shared across the library."""


class TorsionError(Exception):
    """Base class for all library errors."""


class NonConvergent(TorsionError):
    """Torus quadrature failed its grid-doubling certification."""


class NotProjection(TorsionError):
    """Operator is not a self-adjoint idempotent within tolerance."""


class UnsupportedModelPair(TorsionError):
    """Requested algebra combination is not implemented."""


class NotComplex(TorsionError):
    """d composed with d does not vanish within tolerance."""


class NotExact(TorsionError):
    """Sequence fails injectivity/surjectivity/rank conditions."""


class NotInvertible(TorsionError):
    """Operator has (numerically) nontrivial kernel."""


class NotPositive(TorsionError):
    """Operator is not positive definite."""


class NotDeterminantClass(TorsionError):
    """Log-determinants did not certify; real-valued torsion withheld."""


class IllConditioned(TorsionError):
    """A singular value fell inside the rank-decision gray zone."""


class ShapeMismatch(TorsionError):
    """Matrix or complex shapes are inconsistent."""


class HomomorphismInvalid(TorsionError):
    """Generator images do not respect the group relations."""


class NotUnimodular(TorsionError):
    """A generator acts with Fuglede-Kadison determinant != 1."""


class UnknownSpace(TorsionError):
    """No builtin space with that name."""


class BadParams(TorsionError):
    """Invalid parameters for a builtin space."""


class NotSubcomplex(TorsionError):
    """Map is not an inclusion of a subcomplex."""


class NotCellular(TorsionError):
    """Map does not commute with the boundary."""


class EulerNotZero(TorsionError):
    """Fiber Euler characteristic must vanish for the fibration formula."""


class MissingTransport(TorsionError):
    """Bundle data lacks a gluing transport for some base cell."""


class DimensionNotOne(TorsionError):
    """Coefficient bimodule must have von Neumann dimension 1."""


class DocumentError(TorsionError):
    """Malformed input document."""
