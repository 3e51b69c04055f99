"""WAV decoding and clip shaping.

Uses the standard-library ``wave`` reader (uncompressed PCM only, which is
what captioned audio corpora ship). Decoded samples are float64 in [-1, 1].
Clips are mono-ized by averaging channels and then cropped or zero-padded to
a fixed duration so every encoder input has the same length.
"""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

from .errors import BadAudioError, MissingDatasetError

_INT_SCALES = {1: 128.0, 2: 32768.0, 3: 8388608.0, 4: 2147483648.0}


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Decode a PCM WAV file to ``(samples, sample_rate)``.

    ``samples`` has shape (frames, channels), dtype float64, scaled to
    [-1, 1). Supports 8-bit unsigned and 16/24/32-bit signed PCM.

    Raises:
        MissingDatasetError: file does not exist.
        BadAudioError: not a decodable uncompressed PCM WAV.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingDatasetError(f"audio file not found: {path}")
    try:
        with wave.open(str(path), "rb") as wav:
            if wav.getcomptype() != "NONE":
                raise BadAudioError(
                    f"{path}: compressed WAV ({wav.getcomptype()}) is not supported"
                )
            n_channels = wav.getnchannels()
            width = wav.getsampwidth()
            rate = wav.getframerate()
            n_frames = wav.getnframes()
            payload = wav.readframes(n_frames)
    except wave.Error as exc:
        raise BadAudioError(f"{path}: not a readable WAV file: {exc}") from exc
    if width not in _INT_SCALES:
        raise BadAudioError(f"{path}: unsupported sample width {width} bytes")
    if rate <= 0 or n_channels <= 0:
        raise BadAudioError(f"{path}: invalid rate/channel header")

    if width == 1:  # unsigned
        flat = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) - 128.0
    elif width == 3:  # packed little-endian int24
        raw = np.frombuffer(payload, dtype=np.uint8).reshape(-1, 3)
        as_int32 = (
            raw[:, 0].astype(np.int32)
            | (raw[:, 1].astype(np.int32) << 8)
            | (raw[:, 2].astype(np.int32) << 16)
        )
        as_int32 = np.where(as_int32 >= 1 << 23, as_int32 - (1 << 24), as_int32)
        flat = as_int32.astype(np.float64)
    else:
        dtype = "<i2" if width == 2 else "<i4"
        flat = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    if flat.size % n_channels:
        raise BadAudioError(f"{path}: frame payload not divisible by channel count")
    samples = flat.reshape(-1, n_channels) / _INT_SCALES[width]
    return samples, rate


def to_mono(samples: np.ndarray) -> np.ndarray:
    """Average channels to one (frames,) track; mono input passes through."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        return samples
    return samples.mean(axis=1)


def crop_or_pad(mono: np.ndarray, rate: int, seconds: float) -> np.ndarray:
    """Return exactly ``round(rate * seconds)`` samples.

    Longer clips keep their leading samples; shorter ones are zero-padded at
    the end.
    """
    if seconds <= 0:
        raise BadAudioError(f"clip duration must be positive, got {seconds}")
    target = int(round(rate * seconds))
    mono = np.asarray(mono, dtype=np.float64)
    if mono.size >= target:
        return mono[:target].copy()
    out = np.zeros(target, dtype=np.float64)
    out[: mono.size] = mono
    return out


def load_clip(path: str | Path, seconds: float) -> tuple[np.ndarray, int]:
    """Decode, mono-ize, and fix the duration of one audio file."""
    samples, rate = read_wav(path)
    return crop_or_pad(to_mono(samples), rate, seconds), rate
