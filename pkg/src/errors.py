"""Exception hierarchy for abnn-lab.

Every failure raised by the library derives from AbnnError so the CLI can map
it to a structured stderr line. Failures caused by a bad value also derive
from ValueError.
"""
from typing import Optional


class AbnnError(Exception):
    """Base class for all library errors."""


# Autodiff

class ShapeError(AbnnError, ValueError):
    """Operands of an op have incompatible shapes."""


class NonFiniteError(AbnnError, ArithmeticError):
    """An op produced NaN or infinite values."""


class GradientError(AbnnError, ValueError):
    """Backward pass or gradient check was called on invalid input."""


# Layers and model

class BatchTooSmallError(AbnnError, ValueError):
    """Batch statistics requested on a batch of one sample."""


class ConversionError(AbnnError, ValueError):
    """A network cannot be converted to (or built as) the requested form."""


class CheckpointError(AbnnError):
    """Base class for checkpoint codec failures."""


class CheckpointFormatError(CheckpointError, ValueError):
    """The file does not start with the checkpoint magic bytes."""


class CheckpointVersionError(CheckpointError, ValueError):
    """The checkpoint was written by an unsupported format version."""


class CheckpointTruncatedError(CheckpointError, ValueError):
    """The file is shorter than its header announces."""


class CheckpointChecksumError(CheckpointError, ValueError):
    """The CRC32 trailer does not match the file contents."""


# Training

class LabelError(AbnnError, ValueError):
    """A label lies outside [0, num_classes)."""


class MissingGradientError(AbnnError, ValueError):
    """An optimizer step found a trainable parameter without gradient."""


class DivergenceError(AbnnError, ArithmeticError):
    """Training produced a non-finite or exploding loss."""

    def __init__(self, message: str, epoch: int, mode: Optional[int] = None, run: Optional[int] = None):
        super().__init__(message)
        self.epoch = epoch
        self.mode = mode
        self.run = run


class ModeSetError(AbnnError, ValueError):
    """A ModeSet is empty or its members disagree on architecture."""


# Evaluation and data

class MetricError(AbnnError, ValueError):
    """A metric received empty or malformed input."""


class DatasetError(AbnnError, ValueError):
    """A dataset operation received invalid arguments."""


class IdxFormatError(DatasetError):
    """An IDX file has a wrong magic number or inconsistent dimensions."""


class IdxTruncatedError(DatasetError):
    """An IDX file ends before its declared payload."""


class IdxMismatchError(DatasetError):
    """Image and label files disagree on the number of items."""


# Configuration

class ConfigError(AbnnError, ValueError):
    """A run configuration failed schema validation."""

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(message)
        self.pointer = pointer
