"""Exception types shared across the toolkit.

Plain ``ValueError`` is used for bad arguments to pure functions (invalid
intervals, out-of-range parameters); the classes below mark failures that
callers are expected to handle distinctly (bad input files, degenerate
geometry, misconfiguration).
"""


class MespotError(Exception):
    """Base class for all toolkit-specific errors."""


class ParseError(MespotError):
    """A text input file is malformed.  Messages include the line number."""


class ValidationError(MespotError):
    """Parsed content violates a semantic invariant (bad references, ranges)."""


class GeometryError(MespotError):
    """Registration points are degenerate (collinear or coincident)."""


class CoverageError(MespotError):
    """A landmark track does not cover the frames an operation needs."""


class SequenceTooShortError(MespotError):
    """A frame sequence is shorter than the operation's minimum length."""


class TrainingError(MespotError):
    """Classifier training cannot proceed (contradictory labels, empty set)."""


class ConfigurationError(MespotError):
    """A run is misconfigured (too few subjects, empty dataset, zero denominators)."""


class UndefinedMetricError(MespotError):
    """A metric has no defined value for the given inputs (e.g. no matched pairs)."""
