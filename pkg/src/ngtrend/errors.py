"""Exception and warning types raised by ngtrend."""


class NgTrendError(Exception):
    """Base class for all ngtrend errors."""


class InvalidParameter(NgTrendError, ValueError):
    pass


class InvalidSpec(NgTrendError, ValueError):
    pass


class DomainError(NgTrendError, ValueError):
    pass


class NotFinite(NgTrendError, ArithmeticError):
    pass


class NonFiniteInput(NgTrendError, ValueError):
    pass


class LengthMismatch(NgTrendError, ValueError):
    pass


class ZeroMass(NgTrendError, ArithmeticError):
    pass


class ZeroEvidence(NgTrendError, ArithmeticError):
    """The observation likelihood has no overlap with the prior on the grid."""


class UnsupportedKernel(NgTrendError, TypeError):
    pass


class UndefinedAt(NgTrendError, ValueError):
    """The influence function is not defined at the requested point."""

    def __init__(self, x, reason=""):
        self.x = x
        msg = f"influence function undefined at x={x!r}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class NumericalBlowup(NgTrendError, ArithmeticError):
    pass


class DegenerateData(NgTrendError, ValueError):
    pass


class BudgetExhausted(UserWarning):
    """Emitted when an optimizer run stops on its evaluation budget."""
