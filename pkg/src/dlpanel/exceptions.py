"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """Raised when a computation fails for numerical reasons.

    Examples: a covariance matrix that is not positive definite, a
    rank-deficient least-squares design, or a degenerate nodewise fit.
    The CLI maps this to exit code 2 (numerical failure), as opposed to
    exit code 1 (input error).
    """
