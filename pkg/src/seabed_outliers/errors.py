"""Exception hierarchy shared by every module."""


class SeabedOutlierError(Exception):
    """Base class for package errors."""


class InvalidArgumentError(SeabedOutlierError, ValueError):
    pass


class OutOfDomainError(InvalidArgumentError):
    pass


class DataFormatError(SeabedOutlierError, ValueError):
    pass


class UndefinedRateError(SeabedOutlierError, ArithmeticError):
    """A rate was requested over an empty population."""


class NumericalError(SeabedOutlierError, ArithmeticError):
    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class BudgetExceededError(InvalidArgumentError):
    pass
