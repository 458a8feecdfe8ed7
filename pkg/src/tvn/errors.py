"""Exception hierarchy shared across the package.

Each class maps to one CLI exit-code family, so commands can fail with a
distinct code per error class.
"""


class TvnError(Exception):
    """Base class for all package errors."""


class ConfigError(TvnError):
    """Invalid configuration, flags, or preconditions on user input."""


class InvalidGenomeError(TvnError):
    """A suffix is inconsistent with its alphabet (bad index, bad length)."""


class ArtifactError(TvnError):
    """Persisted artifact is missing, malformed, or carries unknown fields."""


class EncoderTransportError(TvnError):
    """A remote encoder could not be reached or kept failing."""

    def __init__(self, encoder: str, message: str):
        super().__init__(f"[{encoder}] {message}")
        self.encoder = encoder


class EncoderProtocolError(TvnError):
    """A remote encoder replied with data violating the wire contract."""

    def __init__(self, encoder: str, message: str):
        super().__init__(f"[{encoder}] {message}")
        self.encoder = encoder


class PipelineError(TvnError):
    """A crafting/verification run could not complete."""
