"""Exception types shared across the package."""


class SegQAError(Exception):
    """Base class for every error raised by this package."""


class FormatError(SegQAError):
    """A file is readable but has an unsupported format property."""


class ValidationError(SegQAError):
    """Input data violates a documented precondition."""


class CalibrationError(SegQAError):
    """Probability channels do not sum to one within tolerance."""


class ContractViolation(SegQAError):
    """An API was called with arguments that break its contract."""


class GenerationError(SegQAError):
    """Synthetic scene generation could not satisfy its constraints."""


class ManifestError(SegQAError):
    """A dataset manifest is malformed or references missing files."""


class UndefinedCorrelationError(SegQAError):
    """Correlation is undefined because a variable is constant."""


class BackendError(SegQAError):
    """Base class for promptable-segmenter failures."""


class BackendUnavailableError(BackendError):
    """The backend could not be reached, or failed after all retries."""


class MissingFixtureError(BackendError):
    """The file backend has no precomputed mask at the expected path."""


class ProtocolError(BackendError):
    """A backend response violates the wire protocol."""
