"""Exception types raised across the package.

Statistical failure modes (non-convergence, inadequate models, low
prevalence) are *verdicts*, not exceptions; only contract violations and
I/O problems raise.
"""


class EpitrendError(Exception):
    """Base class for all package errors."""


class InvalidSeries(EpitrendError):
    """A count series violates a construction invariant."""

    def __init__(self, unit_id: str, message: str):
        self.unit_id = unit_id
        super().__init__(f"unit {unit_id!r}: {message}")


class InvalidDegree(EpitrendError):
    """Polynomial degree outside {1, 2, 3}."""


class SeriesTooShort(EpitrendError):
    """Fewer observations than the model needs."""


class NotConverged(EpitrendError):
    """Operation requires a converged fit."""


class NotCumulative(EpitrendError):
    """Logistic model is defined for cumulative responses only."""


class DegenerateSlope(EpitrendError):
    """Inflection point undefined because the slope parameter is zero."""


class DegreeTooLow(EpitrendError):
    """Degree-1 hazards have no stationary point."""


class ZeroVariance(EpitrendError):
    """Wald test impossible: coefficient variance is not positive."""


# --- ingestion ---

class SourceUnreachable(EpitrendError):
    """Input file or URL could not be read."""


class MalformedHeader(EpitrendError):
    """Expected columns are absent from the CSV header."""


class EmptyFile(EpitrendError):
    """Input contains no data rows."""


class DuplicateCode(EpitrendError):
    """The population file lists a unit code twice."""


class InvalidPopulation(EpitrendError):
    """Population value missing or below 1."""


class DateGap(EpitrendError):
    """A unit's daily rows are not contiguous."""

    def __init__(self, unit_id: str, date, message: str = "missing day"):
        self.unit_id = unit_id
        self.date = date
        super().__init__(f"unit {unit_id!r}: {message} at {date}")


class NoUnits(EpitrendError):
    """No usable unit remained after ingestion."""


# --- reporting ---

class MissingOutline(EpitrendError):
    """Country outline geometry file not found."""
