class PIDError(ValueError):
    """Base class for every error raised by the pid package."""


class AlphabetMismatchError(PIDError):
    pass


class InvalidDistributionError(PIDError):
    pass


class InvalidChannelError(PIDError):
    pass


class DistributionFileError(PIDError):
    """Malformed distribution or channel file (CLI exit code 2)."""


class OptimizerError(PIDError):
    """No feasible point survived the search (CLI exit code 3)."""


class MeasureMismatchError(PIDError):
    """Two routes to the same quantity disagree beyond tolerance."""


class UnknownNameError(PIDError):
    """Unknown example, measure or channel name (CLI exit code 2)."""
