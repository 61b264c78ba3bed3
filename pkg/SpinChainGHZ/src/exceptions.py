# src/exceptions.py
"""Exception hierarchy shared by every SpinChainGHZ module."""


class SpinChainError(Exception):
    """Base class for all domain errors."""


class ChainGeometryError(SpinChainError, ValueError):
    """Invalid chain length, block geometry or coupling pattern."""


class EigensolverError(SpinChainError, RuntimeError):
    """Tridiagonal QL iteration did not converge within its sweep cap."""


class NonPerturbativeRegimeError(SpinChainError, ValueError):
    """Resonant eigenvalue clusters could not be identified."""


class SiteIndexError(SpinChainError, IndexError):
    """Site label out of range, repeated, or not in ascending order."""


class StateValidationError(SpinChainError, ValueError):
    """A density matrix failed its validity checks."""


class OracleCapError(SpinChainError, ValueError):
    """Requested system size exceeds what the exact oracle accepts."""


class FitRefusedError(SpinChainError, ValueError):
    """Not enough points to fit a power law."""


class ConfigError(SpinChainError, ValueError):
    """Malformed configuration value or input file."""
