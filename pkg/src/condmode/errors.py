"""Exception types shared across the package."""


class CondModeError(Exception):
    """Base class for all errors raised by condmode."""


class InvalidToken(CondModeError, ValueError):
    pass


class VocabMismatch(CondModeError, ValueError):
    pass


class ZeroSupport(CondModeError, ValueError):
    pass


class EmptyVariantSet(CondModeError, ValueError):
    pass


class EmptyCorpus(CondModeError, ValueError):
    pass


class OrderTooLarge(CondModeError, ValueError):
    pass


class UnseenContext(CondModeError, ValueError):
    """An unsmoothed n-gram model was queried at a context it never observed."""


class NoFeasibleSequence(CondModeError):
    """No complete sequence with positive mass satisfies the constraint."""


class BudgetExceeded(CondModeError):
    """Search stopped on its node or depth budget.

    The best-so-far result is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class HorizonTooSmall(CondModeError, ValueError):
    pass


class PredictorDomainError(CondModeError, ValueError):
    pass


class LengthMismatch(CondModeError, ValueError):
    pass


class ModelFormatError(CondModeError, ValueError):
    """A model, distribution or spec file could not be parsed."""
