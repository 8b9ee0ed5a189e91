"""Exception types shared across the package."""


class MarkovNashError(Exception):
    """Base class for all package errors."""


class ParseError(MarkovNashError):
    """Input file is not valid JSON (carries line/column diagnostics)."""


class SchemaError(MarkovNashError):
    """Input file parses but does not match the game/policy schema."""


class DimensionMismatch(MarkovNashError):
    """Arrays or owners disagree in shape or indexing."""


class NotUnichain(MarkovNashError):
    """Steady-state solve found a rank deficiency inconsistent with a
    unique invariant distribution."""


class SizeLimitExceeded(MarkovNashError):
    """Exhaustive deterministic-policy enumeration would exceed the cap."""


class NumericalBreakdown(MarkovNashError):
    """LP pivoting or certification failed numerically.

    ``diagnostics`` carries iteration counts and condition indicators.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class GapUndefined(MarkovNashError):
    """Best-response LP reported infeasible although the current policy is
    feasible by direct evaluation: a surfaced numerical inconsistency."""


class InvalidParams(MarkovNashError):
    """Scenario generator called with unusable parameters."""
