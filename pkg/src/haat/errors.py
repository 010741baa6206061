"""Exception hierarchy shared across the package."""


class HaatError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(HaatError):
    """Operands have incompatible or invalid shapes."""


class ConfigError(HaatError):
    """A model configuration field violates its constraints."""


class ContractError(HaatError):
    """An operation was called outside its contract (non-scalar loss, missing grad, ...)."""


class NumericsError(HaatError):
    """A non-finite value appeared where the computation guarantees finiteness."""


class DivergenceError(NumericsError):
    """Training loss became non-finite."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"loss diverged (non-finite) at step {step}")


class WeightFileError(HaatError):
    """Base class for weight-file problems."""


class BadMagicError(WeightFileError):
    """The file does not start with the expected magic bytes."""


class UnsupportedVersionError(WeightFileError):
    """The file's format version is not one this reader understands."""


class TruncatedFileError(WeightFileError):
    """The file ended before the declared content was read."""


class WeightMismatchError(WeightFileError):
    """Stored tensors do not line up with the model being loaded into."""


class ImageError(HaatError):
    """An image file could not be read or has an unsupported format."""


class EmptyDatasetError(HaatError):
    """An evaluation directory contains no usable images."""
