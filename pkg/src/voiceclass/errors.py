"""Exception types shared across the toolkit."""


class VoiceClassError(Exception):
    """Base class for all toolkit errors."""


class FormatError(VoiceClassError):
    """Malformed container or file (bad WAV header, bad manifest line)."""


class UnsupportedError(VoiceClassError):
    """Well-formed input using an encoding we do not handle."""


class InsufficientAudioError(VoiceClassError):
    """Audio too short to produce even one analysis segment."""


class RangeError(VoiceClassError):
    """Frequency or grid bound outside the representable range."""


class SilenceError(VoiceClassError):
    """All-zero spectrum: nothing to normalize or classify."""


class GridError(VoiceClassError):
    """Requested frequency does not lie on the log-frequency grid."""


class InsufficientDataError(VoiceClassError):
    """Not enough samples (or classes) to fit or aggregate."""


class ModelCorruptError(VoiceClassError):
    """Model parameters violate their invariants (e.g. non-PD covariance)."""


class ConfigError(VoiceClassError):
    """Inconsistent run configuration."""


class JoinError(VoiceClassError):
    """Subject ids do not line up between two inputs."""
