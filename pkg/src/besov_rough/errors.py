"""Exception taxonomy shared across modules (and mapped to CLI exit codes)."""


class RegimeError(ValueError):
    """Parameter triple outside the validity regime of the requested operation."""


class NonContractionError(RuntimeError):
    """Fixed-point iteration failed to contract within the allowed halvings."""
