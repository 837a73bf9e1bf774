class QuadRsaError(Exception):
    """Base class for every error raised by this package."""


class ParseError(QuadRsaError, ValueError):
    """Malformed text input: hex strings, key files, CSV, config."""


class DomainError(QuadRsaError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ProtocolError(QuadRsaError, RuntimeError):
    """The hardware simulator was driven through an illegal command sequence."""


class InvariantError(QuadRsaError, RuntimeError):
    """An internal invariant was violated. Always a bug, never user error."""


class KeyGenerationError(QuadRsaError, RuntimeError):
    """Prime search gave up. Retrying with another seed may succeed."""

    retryable = True


class UndefinedCorrelationError(DomainError):
    """Pearson correlation requested for a constant sequence."""
