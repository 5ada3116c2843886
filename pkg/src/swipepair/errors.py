"""Exception types shared across the package."""


class SwipePairError(Exception):
    """Base class for all protocol/simulation errors."""


class ConfigError(SwipePairError):
    """Invalid scenario, preset, or detector configuration."""


class KeyAgreementError(SwipePairError):
    """Key exchange failed (malformed or degenerate peer public key)."""


class OrderingViolation(SwipePairError):
    """A second-half frame arrived before the first-half phase completed."""


class FramingError(SwipePairError):
    """Malformed, duplicated, or length-inconsistent message framing."""


class RecordFormatError(SwipePairError):
    """A decrypted power record failed format validation."""
