"""Exception types shared across the package."""


class EvshiftError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EvshiftError):
    """Configuration file is missing, malformed, or violates an invariant."""


class IntegrationError(EvshiftError):
    """Numerical integration diverged or produced non-finite state."""


class TrajectoryError(EvshiftError):
    """A gearshift trajectory could not be constructed as requested."""


class SpeedMarginUnreachableError(TrajectoryError):
    """The requested motor overspeed target cannot be reached before the
    available torque or the speed limit caps the speed-raise phase."""

    def __init__(self, message: str, reason: str = "power") -> None:
        super().__init__(message)
        self.reason = reason


class InfeasibleShiftError(TrajectoryError):
    """The shift is structurally impossible; no trajectory exists.

    Carries the flag describing the violated constraint so callers can
    report it the same way as a flag on a solved trajectory.
    """

    def __init__(self, message: str, flag=None) -> None:
        super().__init__(message)
        self.flag = flag
