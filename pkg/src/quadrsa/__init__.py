"""Quad-core parallel Montgomery RSA engine with a power-analysis lab."""

from quadrsa.errors import (
    DomainError,
    InvariantError,
    KeyGenerationError,
    ParseError,
    ProtocolError,
    QuadRsaError,
    UndefinedCorrelationError,
)

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "InvariantError",
    "KeyGenerationError",
    "ParseError",
    "ProtocolError",
    "QuadRsaError",
    "UndefinedCorrelationError",
]
