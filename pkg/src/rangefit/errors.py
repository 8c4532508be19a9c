"""Exception types shared across the fitting pipeline."""


class InsufficientSamplesError(ValueError):
    """Raised when a window holds fewer valid samples than a fit requires."""


class DegenerateFitError(ValueError):
    """Raised when a scatter system is rank deficient (collinear or
    otherwise under-determined samples)."""
