"""clap_exporter: dump audio-text encoder embeddings in the comet interchange format."""

__version__ = "0.1.0"

from .audio import crop_or_pad, load_clip, read_wav, to_mono
from .dataset import CaptionedClip, load_split
from .encoders import HashEncoder, TextAudioEncoder, resolve_checksum, resolve_encoder
from .errors import (
    BadAudioError,
    EncoderShapeError,
    ExporterError,
    MissingCheckpointError,
    MissingDatasetError,
)
from .export import ExportJob, export

__all__ = [
    "__version__",
    "BadAudioError",
    "CaptionedClip",
    "EncoderShapeError",
    "ExportJob",
    "ExporterError",
    "HashEncoder",
    "MissingCheckpointError",
    "MissingDatasetError",
    "TextAudioEncoder",
    "crop_or_pad",
    "export",
    "load_clip",
    "load_split",
    "read_wav",
    "resolve_checksum",
    "resolve_encoder",
    "to_mono",
]
