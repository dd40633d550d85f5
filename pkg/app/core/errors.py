"""
Toolkit exceptions

Every error carries the exit code the CLI reports for it:
0 success, 1 usage/config error, 2 data error, 3 internal error.
"""


class ToolkitError(Exception):
    """Base error with an exit code and a human readable detail"""

    exit_code = 3

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ConfigError(ToolkitError):
    """Invalid configuration or operation parameters"""

    exit_code = 1


class DataError(ToolkitError):
    """Missing, unreadable or inconsistent data"""

    exit_code = 2


class WavFormatError(DataError):
    """Malformed WAV header or payload"""


class UnsupportedAudioError(DataError):
    """WAV encoding or channel layout the reader does not handle"""


class ManifestError(DataError):
    """Dataset manifest does not satisfy its invariants"""


class SignalShapeError(DataError):
    """Clip too short for the requested frame layout"""


class InputShapeError(DataError):
    """Model input does not match the classifier's expected shape"""


class CacheError(DataError):
    """Spectrogram cache missing or out of date"""


class CheckpointError(DataError):
    """Checkpoint unreadable or incompatible with the cache"""
