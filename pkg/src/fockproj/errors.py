"""Exception types shared across the package."""


class FockProjError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(FockProjError, ValueError):
    """Cutoff or mode count outside the supported range."""


class DimensionMismatchError(FockProjError, ValueError):
    """Operands built for different cutoffs or mode counts."""


class NumericError(FockProjError, ValueError):
    """NaN/Inf encountered, or a numerical routine failed to converge."""


class TruncationError(FockProjError, ValueError):
    """Cutoff too small for the requested state or operation."""


class DegenerateProjectionError(FockProjError, ValueError):
    """Projection produced a state with numerically vanishing norm."""


class UnstableDenominatorError(FockProjError, ValueError):
    """Monte-Carlo denominator indistinguishable from zero."""


class StructureError(FockProjError, ValueError):
    """Operation requires structure (e.g. separable terms) the input lacks."""


class SpectralWindowError(FockProjError, ValueError):
    """Homodyne outcome grid extends beyond the trustworthy spectral window."""


class ConfigurationError(FockProjError, ValueError):
    """Invalid or inconsistent run configuration."""
