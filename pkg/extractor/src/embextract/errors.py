"""Typed extraction errors; the CLI maps them onto exit code 2."""


class ExtractError(Exception):
    """Base class for extraction failures."""


class CheckpointLoadError(ExtractError):
    """Checkpoint id or path could not be loaded."""


class AudioDecodeError(ExtractError):
    """An audio file is missing, unreadable, or not a supported WAV."""


class EmptyAudio(ExtractError):
    """Decoded audio is too short to produce a single frame."""


class ManifestError(ExtractError):
    """Manifest rows are malformed or labels are inconsistent."""
