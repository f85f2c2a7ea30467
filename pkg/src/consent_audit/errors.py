"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, NetworkExhausted -> 3,
DataError (and subclasses) -> 4.
"""


class ConsentAuditError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ConsentAuditError):
    """Bad configuration file, flag combination, or startup input."""


class DataError(ConsentAuditError):
    """Malformed or inconsistent data fed into an operation."""


class InputError(DataError):
    """An operation precondition was violated by the caller."""


class NetworkExhausted(ConsentAuditError):
    """All retries against a remote endpoint failed."""

    def __init__(self, message: str, attempts: int = 0):
        super().__init__(message)
        self.attempts = attempts


class ProtocolError(DataError):
    """A remote endpoint replied with something we cannot interpret."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw
