"""Warning and exception types shared across the package."""


class TruncationOverflowWarning(UserWarning):
    """Probability mass is reaching the top of the truncated number ladder."""


class ValidityWarning(UserWarning):
    """A modelling assumption (short kick, weak dissipation, ...) is strained."""


class NonNormalizableError(ValueError):
    """The product-form steady state does not decay at the truncation."""


class DegenerateKernelError(RuntimeError):
    """The generator has more than one steady state at the working tolerance."""


class DiagonalClosureError(RuntimeError):
    """The exact bipartite kick produced off-diagonal resonator elements."""


class ConvergenceError(RuntimeError):
    """An integrator or iterative solver failed to reach its tolerance."""
