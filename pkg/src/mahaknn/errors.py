"""Typed exceptions shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, ``DataError``
subclasses exit 2, ``NumericalError`` subclasses exit 3.
"""


class MahaknnError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 2


class DataError(MahaknnError):
    """Invalid input data, malformed files, or mismatched dimensions."""

    exit_code = 2


class NumericalError(MahaknnError):
    """A numerical procedure failed on otherwise well-formed input."""

    exit_code = 3


# --- file formats ---------------------------------------------------------

class BadMagic(DataError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersion(DataError):
    """File declares a format version this reader does not understand."""


class VersionMismatch(DataError):
    """Model file version differs from the one this build writes."""


class TruncatedPayload(DataError):
    """File size disagrees with the sizes declared in its header."""


class InvalidHeader(DataError):
    """Header fields violate the format's invariants."""


class NonFiniteValue(DataError):
    """A float payload contains NaN or infinity."""


class InvalidLabel(DataError):
    """A label is outside the set allowed by the header."""


class IoFailure(DataError):
    """Underlying OS read/write failed."""


class DimensionMismatch(DataError):
    """Array shapes disagree with what the model or file expects."""


# --- statistics and detectors ---------------------------------------------

class EmptyInput(DataError):
    """Operation needs at least one element."""


class InsufficientSamples(DataError):
    """Too few rows for the requested fit."""


class AsymmetricInput(DataError):
    """Matrix expected to be symmetric is not, beyond tolerance."""


class NotFactorizable(NumericalError):
    """Cholesky ridge ladder exhausted without a successful factorization."""


class OodInTrainingSet(DataError):
    """Training data contains rows labelled as out-of-distribution (-1)."""


class BadContamination(DataError):
    """Contamination fraction outside the open interval (0, 0.5)."""


class MissingLogits(DataError):
    """Operation requires classifier logits but the set has none."""


class MissingLabels(DataError):
    """Operation requires labels but the set has none."""


class MissingBackground(DataError):
    """Relative scoring requires a background fit that is absent."""


class ClassTooSmall(DataError):
    """A class has too few samples (or too few classes exist) for the fit."""


class EmptyLogits(DataError):
    """Logit vector is empty."""


class LabelOutOfRange(DataError):
    """Class label outside [0, M)."""


class OneClassOnly(DataError):
    """Metric needs both positive and negative samples."""


class BadConfig(DataError):
    """Configuration values violate their documented ranges."""
