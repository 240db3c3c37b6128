"""Exception and warning types shared across the package."""

from __future__ import annotations


class ConfigurationError(Exception):
    """Invalid configuration value or a model/data dimension mismatch."""


class ProtocolError(Exception):
    """A transfer message violates the protocol contract."""


class CorruptMessageError(ProtocolError):
    """A serialized or structured message cannot be decoded safely."""


class ShrunkCodebookWarning(UserWarning):
    """Requested cluster count exceeded the number of distinct values."""
