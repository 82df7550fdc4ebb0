"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class IRBRiskError(Exception):
    """Base class for all package errors."""


class ValidationError(IRBRiskError, ValueError):
    """Input data or configuration failed validation."""


class DomainError(IRBRiskError, ValueError):
    """A numeric argument lies outside the domain of the operation."""


class RootBracketError(DomainError):
    """A bracketed root search found no sign change."""


class DegenerateSampleError(DomainError):
    """The sample has zero variance or otherwise admits no statistic."""


class SampleSizeError(ValidationError):
    """Sample size outside the range supported by a test."""


class ResourceError(IRBRiskError, RuntimeError):
    """The requested computation does not fit the configured memory budget."""
