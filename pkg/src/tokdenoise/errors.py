"""Exception hierarchy shared across the package.

Every error the pipeline raises deliberately derives from TokdenoiseError so
the CLI can map failures onto its stable exit codes (config -> 2, I/O and
format -> 3, numeric divergence -> 4).
"""


class TokdenoiseError(Exception):
    """Base class for all errors raised on purpose by this package."""


class ConfigError(TokdenoiseError):
    """Invalid or inconsistent configuration (unknown key, bad range, ...)."""


class FormatError(TokdenoiseError):
    """A file does not match its expected on-disk format."""


class DimensionError(TokdenoiseError):
    """Tensor or signal shapes do not line up."""


class NumericError(TokdenoiseError):
    """Non-finite values where finite ones are required (NaN loss, ...)."""


class StateError(TokdenoiseError):
    """Operation called in the wrong order (e.g. backward with no graph)."""


class DegenerateInputError(TokdenoiseError):
    """Input is technically well-formed but unusable (empty clip, silence)."""


class CorruptionError(TokdenoiseError):
    """Stored data violates its own invariants (token out of range, ...)."""
