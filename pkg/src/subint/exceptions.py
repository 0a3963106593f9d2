"""Exception types shared across the package."""


class SubintError(Exception):
    """Base class for package errors."""


class InvalidArgumentError(SubintError, ValueError):
    pass


class DomainError(SubintError, ValueError):
    """A point lies outside the support of a basis or estimator."""


class UnsupportedOperationError(SubintError, NotImplementedError):
    pass


class EmptyNeighborhoodError(SubintError, ArithmeticError):
    """Kernel weights sum to zero at the requested point."""

    def __init__(self, x):
        self.x = x
        super().__init__(f"no kernel mass at x={list(map(float, x))}")


class NumericError(SubintError, ArithmeticError):
    """An integrand produced a non-finite value at a quadrature node."""


class ReplicationError(SubintError, RuntimeError):
    def __init__(self, n, b, seed, cause):
        self.n, self.b, self.seed = n, b, seed
        super().__init__(f"replication failed (n={n}, b={b}, seed={seed}): {cause!r}")
