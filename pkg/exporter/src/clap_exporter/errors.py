"""Exception hierarchy for the exporter.

Everything raised on purpose derives from ExporterError so the CLI can turn
any domain failure into a single-line diagnostic and exit code 1.
"""

from __future__ import annotations


class ExporterError(Exception):
    """Base class for all exporter-domain failures."""


class MissingDatasetError(ExporterError):
    """Dataset root, split directory, captions file, or audio file not found."""


class MissingCheckpointError(ExporterError):
    """Checkpoint id cannot be resolved to a usable encoder."""


class BadAudioError(ExporterError):
    """Audio file exists but cannot be decoded (format, compression, width)."""


class EncoderShapeError(ExporterError):
    """Encoder returned a batch whose shape contradicts its advertised width."""
