"""Exception types shared across the toolkit.

The command line front end maps these onto exit codes, so solver and
diagnostic code should raise the most specific type available.
"""


class LowmachError(Exception):
    """Base class for all toolkit errors."""


class GridMismatchError(LowmachError):
    """Fields built on different grids were combined."""


class TimeSyncError(LowmachError):
    """States handed to a diagnostic carry inconsistent times."""


class StepSizeError(LowmachError):
    """A requested time step exceeds the stability or accuracy bound."""


class NumericalBlowupError(LowmachError):
    """Non-finite values appeared in a trajectory."""


class VacuumError(LowmachError):
    """Density dropped at or below the vacuum floor where it must not."""


class RealizabilityError(LowmachError):
    """Requested initial velocity cannot be encoded in a single-valued
    wave function phase (nonzero winding or non-constant solenoidal part)."""


class PropertyViolationError(LowmachError):
    """A monitored mathematical invariant failed along a run."""


class SweepError(LowmachError):
    """A sweep sub-run failed; carries the report for the completed runs."""

    def __init__(self, message, report=None, cause=None):
        super().__init__(message)
        self.report = report
        self.cause = cause


class ConfigError(LowmachError):
    """Invalid run configuration or malformed input file."""


class UsageError(LowmachError):
    """Bad command line invocation."""
