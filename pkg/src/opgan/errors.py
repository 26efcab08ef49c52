"""Error taxonomy shared by the library and the CLI exit-code mapping."""


class OpganError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(OpganError):
    """Bad shapes, bad flags, bad config keys: the request itself is invalid."""


class InputError(OpganError):
    """The request was fine but the supplied data is not usable."""


class DivergenceError(OpganError):
    """Training produced a non-finite loss; checkpoint state was not written."""


class RetryError(OpganError):
    """Rejection sampling exhausted its retry budget.

    Carries the artifact flags that failed so the caller can reselect.
    """

    def __init__(self, message, flags):
        super().__init__(message)
        self.flags = flags
