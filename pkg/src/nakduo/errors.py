"""Exception types shared across the package.

Every failure mode that callers are expected to handle gets its own class;
analysis routines never return sentinel values in place of raising.
"""


class NakduoError(Exception):
    """Base class for all package errors."""


class ConfigInvalid(NakduoError):
    """Bad user configuration (parameters, ranges, unknown names)."""


class StepSizeUnderflow(NakduoError):
    """The adaptive integrator drove the step below the resolvable size."""


class MaxTimeExceeded(NakduoError):
    """Requested integration span exceeds the configured time budget."""


class NoRecurrence(NakduoError):
    """Trajectory stopped crossing the section before enough events."""


class NoConvergence(NakduoError):
    """Root polishing failed from every available seed."""


class NewtonDiverged(NakduoError):
    """A Newton iteration left its basin or exceeded its step budget."""


class BranchEscapedBox(NakduoError):
    """Continuation left the physically meaningful state box."""


class BranchLost(NakduoError):
    """Cycle continuation could not correct back onto the branch."""

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good


class Inconclusive(NakduoError):
    """A detector could not certify either outcome."""


class CurveFitFailed(NakduoError):
    """Section crossings do not form a closed invariant curve."""


class NotPeriodic(NakduoError):
    """Signature extraction found no repeating block (chaotic window)."""

    def __init__(self, message, window_stats=None):
        super().__init__(message)
        self.window_stats = window_stats


class WindowTooShort(NakduoError):
    """Analysis window holds too few spikes for a stable verdict."""


class AnalysisFailed(NakduoError):
    """Top-level wrapper for module errors escaping through the CLI."""
