"""Exception and warning types shared across the toolkit.

Every domain error raised by this package derives from :class:`CometError`,
so callers (including the CLI) can distinguish expected input problems from
genuine bugs with a single ``except`` clause.
"""

from __future__ import annotations


class CometError(Exception):
    """Base class for all toolkit errors."""


class MalformedHeaderError(CometError):
    """A binary tensor file is not a well-formed NPY v1.0 file."""


class UnsupportedDtypeError(CometError):
    """A tensor file holds a dtype other than 32- or 64-bit IEEE floats."""


class ShapeError(CometError):
    """An array does not have the required rank or minimum extent."""


class NonFiniteDataError(CometError):
    """An array contains NaN or infinite entries."""


class PairingError(CometError):
    """Text rows, audio rows, and group ids cannot be aligned one-to-one."""


class GroupError(CometError):
    """Group ids are missing, inconsistent, or not contiguous runs."""


class DegenerateInputError(CometError):
    """An operation needs more rows (or more variation) than the input has."""


class DimensionMismatchError(CometError):
    """An embedding or coefficient width does not match the fitted model."""


class BadKError(CometError):
    """A head size / direction index is outside the valid range."""


class ModalityError(CometError):
    """An operation received data from the wrong modality."""


class EmptyBankError(CometError):
    """A memory bank with zero rows was supplied."""


class BadTauError(CometError):
    """A softmax temperature is non-positive or makes every weight underflow."""


class BadMassError(CometError):
    """A cumulative-mass threshold is outside the open interval (0, 1)."""


class MissingTextsError(CometError):
    """A text-attribution query was made on a dataset without raw texts."""


class NoPositivesError(CometError):
    """A retrieval query has an empty relevant set."""


class BadSpecError(CometError):
    """A synthetic dataset specification is internally inconsistent."""


class ZeroRowWarning(UserWarning):
    """A row with zero Euclidean norm was left unchanged by normalization."""
