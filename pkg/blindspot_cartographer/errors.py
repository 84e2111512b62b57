"""
Error kinds for the blind-spot toolchain
Every error carries the process exit code the CLI reports for it
"""

from pathlib import Path
from typing import Optional, Union


class BlindSpotError(Exception):
    """Base class for all errors raised by blindspot_cartographer"""
    exit_code = 1


class InvalidInputError(BlindSpotError, ValueError):
    """Raster size mismatch, unknown label, out-of-range parameter"""
    exit_code = 7


class WindowUnderflowError(BlindSpotError):
    """Not enough future frames to aggregate the requested window"""
    exit_code = 3

    def __init__(self, frame: int, window: int, last_index: int):
        self.frame = frame
        self.window = window
        self.last_index = last_index
        if last_index < 0:
            hint = "no frame of this sequence is processable"
        else:
            hint = f"last processable index is {last_index}"
        super().__init__(
            f"frame {frame} needs {window} future frames; {hint}"
        )


class DegenerateFitError(BlindSpotError):
    """Least-squares alignment has too few samples or no spread"""
    exit_code = 4


class EmptyVisibilityError(BlindSpotError):
    """Visibility mask selects no pixel"""
    exit_code = 5


class SequenceFormatError(BlindSpotError):
    """Base class for on-disk sequence problems"""
    exit_code = 9

    def __init__(self, message: str, path: Optional[Union[str, Path]] = None):
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            message = f"{self.path}: {message}"
        super().__init__(message)


class MissingFileError(SequenceFormatError):
    exit_code = 10


class FrameCountMismatchError(SequenceFormatError):
    exit_code = 11


class MalformedLineError(SequenceFormatError):
    exit_code = 12

    def __init__(self, path: Union[str, Path], line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}", path)


class RasterMismatchError(SequenceFormatError):
    exit_code = 13

    def __init__(self, path: Union[str, Path], frame: int, reason: str):
        self.frame = frame
        super().__init__(f"frame {frame}: {reason}", path)


class InvariantViolationError(SequenceFormatError):
    exit_code = 14


class OutputWriteError(BlindSpotError):
    """Writing an output raster or report failed"""
    exit_code = 20

    def __init__(self, path: Union[str, Path], cause: Exception):
        self.path = Path(path)
        self.cause = cause
        super().__init__(f"cannot write {self.path}: {cause}")


class GradientCheckError(BlindSpotError):
    """Analytic gradients disagree with finite differences"""
    exit_code = 30


class GateRejectedError(BlindSpotError):
    """Video excluded by the alignment correlation gate"""
    exit_code = 6
