"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when inputs violate a documented contract (bad shapes,
    malformed annotations, impossible configurations)."""


class UnsupportedVersionError(ValidationError):
    """Raised when a serialized file declares a format version this
    build does not understand."""
