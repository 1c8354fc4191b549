from __future__ import annotations


class TorsimError(Exception):
    """Base exception for torsim domain/runtime errors."""


class ConfigError(TorsimError, ValueError):
    """Invalid or unsupported simulator configuration."""


class UnsupportedConfigError(ConfigError):
    pass


class ContractViolation(TorsimError, ValueError):
    """A caller broke the precondition of a geometry or routing function."""
