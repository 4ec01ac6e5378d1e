"""Exception types shared across the package."""


class SaptError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SaptError):
    """Invalid configuration value or out-of-contract argument."""


class InvalidDescriptorError(SaptError):
    """Descriptor contains non-finite coordinates or has the wrong dimension."""


class EmptyRepertoireError(SaptError):
    """Operation requires at least one occupied cell."""


class CorruptRepertoireError(SaptError):
    """Repertoire entry is missing data required by the operation."""


class RepertoireFormatError(SaptError):
    """Repertoire file cannot be parsed. Message includes the line number."""


class RepertoireVersionError(SaptError):
    """Repertoire file was written by an incompatible format version."""


class EvaluationFailedError(SaptError):
    """A rollout diverged (non-finite state); the candidate is discarded."""


class EvolutionFailedError(SaptError):
    """No initial policy evaluated successfully; the archive would be empty."""


class NumericalError(SaptError):
    """A linear-algebra step failed (e.g. non-positive-definite kernel matrix)."""
