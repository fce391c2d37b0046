"""Exception hierarchy shared by all expik modules."""


class ExpikError(Exception):
    """Base class for all errors raised by expik."""


class ContractViolation(ExpikError, ValueError):
    """An argument violates a documented precondition."""


class NumericOverflow(ExpikError, FloatingPointError):
    """A computation left the representable floating point range."""


class NumericFailure(ExpikError, ArithmeticError):
    """NaN or Inf appeared inside an iteration.

    ``step`` is the (1-based) iteration index where it was detected.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class EstimateFailed(ExpikError, RuntimeError):
    """An iterative estimate did not converge within its iteration cap."""

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class DerivativeOrderUnavailable(ExpikError, LookupError):
    """A source cannot supply the requested derivative columns."""


class OracleUncertified(ExpikError, RuntimeError):
    """The reference solver could not certify its own accuracy."""

    def __init__(self, message, coarse=None, fine=None):
        super().__init__(message)
        self.coarse = coarse
        self.fine = fine
