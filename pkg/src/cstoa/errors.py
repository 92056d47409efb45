"""Exception types raised by the simulator."""


class CstoaError(Exception):
    """Base class for all simulator errors."""


class ParameterError(CstoaError, ValueError):
    """An argument lies outside its admissible range."""


class ConfigurationError(CstoaError, ValueError):
    """A combination of settings cannot be realized (e.g. taps outside the frame)."""


class DimensionError(CstoaError, ValueError):
    """Array shapes do not agree."""


class ChannelError(CstoaError, RuntimeError):
    """The channel generator could not produce a usable realization."""


class TrialError(CstoaError, RuntimeError):
    """A Monte-Carlo trial failed; the message names the trial."""


class SweepError(CstoaError, RuntimeError):
    """A sweep grid point failed; the message names the point."""
