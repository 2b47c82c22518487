"""
Exception hierarchy for WMLG Lab.
Every error raised by the library derives from WMLGError so the CLI can map
computation failures to exit code 1 and configuration failures to exit code 2.
"""

from typing import Any, Optional


class WMLGError(Exception):
    """Base class for all library errors."""


# Panel data

class PanelError(WMLGError, ValueError):
    """Invalid or inconsistent panel input."""


class UnbalancedPanel(PanelError):
    """An (id, time) cell is missing."""


class InvalidOutcome(PanelError):
    """An outcome is negative or not finite."""


class ParseError(PanelError):
    """A row could not be parsed."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class DuplicateObservation(PanelError):
    """The same (id, time) pair appears twice."""


class UnknownTime(WMLGError, KeyError):
    """Requested time is not on the panel grid."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown time"


# Index computation

class InvalidIndexSpec(WMLGError, ValueError):
    """Index parameters out of range (k < 1, alpha < 0, ...)."""


class InvalidCostFunction(WMLGError, ValueError):
    """Cost function leaves [0, 1] or has an unbounded derivative."""


class InvalidWeightIndex(WMLGError, ValueError):
    """A weight argument mu1*n + mu2*Q - mu3*j + mu4 is not positive."""


class DegenerateWeights(WMLGError, ValueError):
    """B(Q) vanishes although Q >= 1."""


class SeriesComputationError(WMLGError):
    """Failure while computing one time point of an index series."""

    def __init__(self, time: Any, cause: Exception):
        self.time = time
        self.cause = cause
        super().__init__(f"t={time}: {cause}")


# Asymptotics

class QuadratureError(WMLGError):
    """Numerical integration did not reach the requested tolerance."""


class DegenerateModel(WMLGError, ValueError):
    """Distribution model violates a bound needed by the limit theory."""


class DegenerateCrossSection(WMLGError, ValueError):
    """No observation at or below the threshold at some time."""


class InternalError(WMLGError):
    """Consistency check failed inside a computation."""


# Inference

class UndefinedRelativeChange(WMLGError, ZeroDivisionError):
    """Relative change requested with J(t) = 0."""


class NegativeVariance(WMLGError, ValueError):
    """Variance input is negative beyond the clamping tolerance."""


# Configuration

class ConfigError(WMLGError, ValueError):
    """Invalid command line or configuration file."""
