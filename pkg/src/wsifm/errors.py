"""Exception hierarchy shared by all wsifm modules.

The CLI maps these onto exit codes (config 2, calibration 3, solver and
integration failures 4).
"""


class WsifmError(Exception):
    """Base class for all package errors."""


class ConfigurationError(WsifmError):
    """Invalid or inconsistent configuration values."""


class UsageError(WsifmError):
    """An operation was called with incompatible arguments (e.g. states
    living on different grids)."""


class SolverError(WsifmError):
    """Eigensolver failure."""


class LocalizationError(SolverError):
    """No acceptably localized lowest-band state found for a requested well."""

    def __init__(self, well, message=None):
        self.well = well
        super().__init__(message or f"no localized state found for well {well}")


class CalibrationError(WsifmError):
    """Pulse-duration calibration failed to bracket its target event.

    The population trace explored by the search is attached as ``trace``
    (tuple of time, source-population and target-population arrays).
    """

    def __init__(self, message, trace=None):
        self.trace = trace
        super().__init__(message)


class IntegrationError(WsifmError):
    """Adaptive step-size underflow during time integration."""

    def __init__(self, message, t=None, dt=None):
        self.t = t
        self.dt = dt
        super().__init__(message)
