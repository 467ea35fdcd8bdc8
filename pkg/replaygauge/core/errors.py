"""
Domain errors.

Every error raised on bad input is a ``ValueError`` so callers that only
care about "the input was wrong" can keep catching that.
"""
from typing import Optional


class ReplayGaugeError(ValueError):
    """Base class for all replaygauge errors."""


# ---------------------------------------------------------------------------
# Event log ingestion
# ---------------------------------------------------------------------------

class EventLogError(ReplayGaugeError):
    """A listening-event row could not be accepted."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedRow(EventLogError):
    pass


class NegativeDuration(EventLogError):
    pass


class NegativeTimestamp(EventLogError):
    pass


class EmptyLog(ReplayGaugeError):
    pass


class InvalidParameter(ReplayGaugeError):
    pass


# ---------------------------------------------------------------------------
# Signals
# ---------------------------------------------------------------------------

class InconsistentInputs(ReplayGaugeError):
    pass


class UnknownFunction(ReplayGaugeError):
    pass


class UnknownMode(ReplayGaugeError):
    pass


# ---------------------------------------------------------------------------
# Recommenders
# ---------------------------------------------------------------------------

class NonBinaryMatrix(ReplayGaugeError):
    pass


class UnknownUser(ReplayGaugeError):
    def __init__(self, user: int):
        self.user = user
        super().__init__(f"Unknown user: {user}")


class EmptyRatings(ReplayGaugeError):
    pass


class InvalidHyperparameter(ReplayGaugeError):
    pass


class NegativeCounts(ReplayGaugeError):
    pass


# ---------------------------------------------------------------------------
# Classifier / evaluation
# ---------------------------------------------------------------------------

class MissingClass(ReplayGaugeError):
    pass


class ZeroDenominator(ReplayGaugeError):
    pass


class NoEvaluableUsers(ReplayGaugeError):
    pass


# ---------------------------------------------------------------------------
# Generator / artifacts
# ---------------------------------------------------------------------------

class InvalidConfig(ReplayGaugeError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ArtifactError(ReplayGaugeError):
    """A persisted artifact is missing or has an unexpected format."""
