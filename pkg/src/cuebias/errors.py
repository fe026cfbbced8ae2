"""Exception hierarchy shared by the library and the command line.

Every exception carries a stable ``code`` string and maps onto one of the
CLI exit statuses (usage, I/O, validation).
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_VALIDATION = 4


class CuebiasError(Exception):
    code = "error"
    exit_code = EXIT_VALIDATION


class ValidationError(CuebiasError, ValueError):
    code = "invalid"
    exit_code = EXIT_VALIDATION


class DimensionMismatchError(ValidationError):
    code = "dimension-mismatch"


class ImageIOError(CuebiasError, OSError):
    code = "io"
    exit_code = EXIT_IO


class MissingFileError(ImageIOError, FileNotFoundError):
    code = "missing-file"


class UnsupportedBitDepthError(ImageIOError):
    code = "unsupported-bit-depth"


class UnsupportedColorTypeError(ImageIOError):
    code = "unsupported-color-type"


class NotPNGError(ImageIOError):
    code = "not-png"
