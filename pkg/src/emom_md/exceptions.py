"""Exception types shared across the package."""


class EmomError(Exception):
    """Base class for all package errors."""


class ConfigError(EmomError):
    """Invalid configuration: schema violation, bad value, or an infeasible
    initial mass balance.  Maps to CLI exit code 2."""


class NumericsError(EmomError):
    """Numerical failure during a run (divergence, CFL violation, radius
    update with nonpositive radicand, ...).  Carries the step and/or point
    index where the failure occurred when known.  Maps to CLI exit code 3."""

    def __init__(self, message, step_index=None, point_index=None):
        super().__init__(message)
        self.step_index = step_index
        self.point_index = point_index
