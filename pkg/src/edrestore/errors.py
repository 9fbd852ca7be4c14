"""Exception types shared across the toolkit."""


class EdrestoreError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(EdrestoreError):
    """Image or channel dimensions do not match what the operation needs."""


class NoContentError(EdrestoreError):
    """No drawing content could be located (blank input)."""


class SizeError(EdrestoreError):
    """Requested patch size does not fit inside the image."""


class OverlapError(EdrestoreError):
    """Patch overlap is negative or at least as large as the patch size."""


class GeometryError(EdrestoreError):
    """Patch grid geometry is inconsistent (sizes, coverage, or origins)."""


class EmptyGlcmError(EdrestoreError):
    """No valid pixel pair exists for the requested co-occurrence offset."""


class ConfigError(EdrestoreError):
    """Invalid configuration value or unknown configuration key."""


class TooSmallError(EdrestoreError):
    """Downsampling would shrink a dimension below the supported minimum."""


class PluginError(EdrestoreError):
    """External plug-in failed to run (bad exit status, timeout, crash)."""


class ProtocolError(EdrestoreError):
    """External plug-in ran but produced output violating the wire protocol."""


class FrameError(EdrestoreError):
    """Detections from mixed coordinate frames were combined."""


class SchemaError(EdrestoreError):
    """Drawing description violates the XML export schema."""


class ParseError(EdrestoreError):
    """Annotation or detection file could not be parsed."""
