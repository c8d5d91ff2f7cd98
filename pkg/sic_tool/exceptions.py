"""Error types raised by the simulator library.

Library functions raise these; the boundary functions in `core`, `reports`
and `cli` catch them and turn them into (success, message) results or exit
codes.
"""


class SicToolError(Exception):
    """Root of every error raised on purpose by `sic_tool`."""


class InvalidArgumentError(SicToolError, ValueError):
    """An argument is outside the domain of the operation."""


class FramingError(SicToolError):
    """A time-domain stream does not split into whole OFDM symbols."""


class PreconditionError(SicToolError):
    """An input violates a documented precondition (e.g. insufficient oversampling)."""


class ConfigurationError(SicToolError):
    """A scenario or component configuration is invalid."""


class InvalidTrainingError(SicToolError):
    """The training symbol cannot support least-squares channel estimation."""


class NumericalGuardError(SicToolError):
    """A numerically unsafe division was refused."""


class ReportWriteError(SicToolError):
    """Writing a result file failed; the message carries the path."""


class SmallAngleWarning(UserWarning):
    """Phase-noise power too large for the additive small-angle model."""
