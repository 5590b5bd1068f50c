class BowenDimError(Exception):
    """Base class for all errors raised by bowen_dim."""


class ValidationError(BowenDimError, ValueError):
    """A parameter or structure violates a stated constraint."""


class BudgetExceededError(BowenDimError):
    """An enumeration or grid would exceed its configured size budget."""


class BracketError(BowenDimError):
    """The Bowen root could not be bracketed."""


class EscapeError(BowenDimError):
    """A base point leaves the surviving set before the requested depth."""

    def __init__(self, message, escape_time):
        super().__init__(message)
        self.escape_time = escape_time
