"""Exception hierarchy.

Every error raised on purpose by this package derives from
:class:`MaxwellTDRError`, and carries a short ``category`` string that the
command-line front end turns into an exit code.
"""


class MaxwellTDRError(Exception):
    category = "error"
    exit_code = 1


class DomainError(MaxwellTDRError, ValueError):
    """An argument lies outside the domain of the operation."""

    category = "domain"
    exit_code = 2


class ConfigurationError(MaxwellTDRError, ValueError):
    category = "config"
    exit_code = 3


class ShapeError(MaxwellTDRError, ValueError):
    category = "shape"
    exit_code = 4


class MediumError(MaxwellTDRError, ValueError):
    category = "medium"
    exit_code = 5


class InstabilityError(MaxwellTDRError, RuntimeError):
    """Raised when time stepping produces non-finite values."""

    category = "instability"
    exit_code = 6

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite field values at step {step}")


class EmptyRegionError(MaxwellTDRError, ValueError):
    category = "region"
    exit_code = 7


class RecordFormatError(MaxwellTDRError):
    """Base class for problems with an on-disk boundary record."""

    category = "format"
    exit_code = 8


class BadMagicError(RecordFormatError):
    pass


class HeaderError(RecordFormatError):
    pass


class TruncatedPayloadError(RecordFormatError):
    """Payload ends in the middle of a float64 value."""


class PayloadSizeError(RecordFormatError):
    def __init__(self, expected, found):
        self.expected = expected
        self.found = found
        super().__init__(
            f"payload holds {found} float64 values, header implies {expected}"
        )


class RecordPathError(MaxwellTDRError, FileNotFoundError):
    category = "path"
    exit_code = 9

    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"no such record file: {self.path}")
