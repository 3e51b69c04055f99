"""Embedding export: dataset + encoder -> tensors + manifest.

Output directory layout::

    text.npy       (N, C) one row per caption, CSV order, captions of one
                   clip contiguous
    audio.npy      (G, C) one row per clip, CSV order
    manifest.json  names both tensors, assigns group ids, carries the raw
                   captions, and records export provenance under "export"

Tensors are written as little-endian NPY v1.0 and rows are raw encoder
outputs — no normalization, centering, or truncation happens here, so one
export serves every downstream experiment. All writes are atomic
(temp-then-rename) and a re-run of the same job produces byte-identical
files.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .audio import load_clip
from .dataset import CaptionedClip, load_split
from .encoders import resolve_checksum, resolve_encoder
from .errors import EncoderShapeError, ExporterError

_PRECISION_DTYPES = {"f32": "<f4", "f64": "<f8"}


@dataclass(frozen=True)
class ExportJob:
    """Everything that determines one export run.

    Attributes:
        checkpoint: encoder id (``toy[:<dim>]`` or ``module:...``).
        dataset_root: directory holding the split folders and captions CSVs.
        split: split name (e.g. ``development``, ``evaluation``).
        out_dir: output directory, created if needed.
        crop_seconds: fixed clip duration; longer audio is cropped, shorter
            zero-padded.
        batch_size: encoder batch size (affects memory only, not results).
        precision: tensor dtype on disk, ``f32`` or ``f64``.
    """

    checkpoint: str
    dataset_root: Path
    split: str
    out_dir: Path
    crop_seconds: float = 10.0
    batch_size: int = 32
    precision: str = "f32"

    def __post_init__(self) -> None:
        if self.crop_seconds <= 0:
            raise ExporterError(f"crop_seconds must be positive, got {self.crop_seconds}")
        if self.batch_size < 1:
            raise ExporterError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.precision not in _PRECISION_DTYPES:
            raise ExporterError(
                f"precision must be one of {sorted(_PRECISION_DTYPES)}, "
                f"got {self.precision!r}"
            )


def _atomic_bytes(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(payload)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _write_npy(path: Path, array: np.ndarray, precision: str) -> None:
    import io

    out = np.ascontiguousarray(array.astype(_PRECISION_DTYPES[precision]))
    buf = io.BytesIO()
    np.lib.format.write_array(buf, out, version=(1, 0), allow_pickle=False)
    _atomic_bytes(path, buf.getvalue())


def _encode_texts(encoder, clips: list[CaptionedClip], batch_size: int) -> np.ndarray:
    captions = [caption for clip in clips for caption in clip.captions]
    blocks = []
    for start in range(0, len(captions), batch_size):
        block = np.asarray(encoder.encode_text(captions[start : start + batch_size]))
        blocks.append(np.atleast_2d(block))
    return np.vstack(blocks)


def _encode_audio(
    encoder, clips: list[CaptionedClip], crop_seconds: float, batch_size: int
) -> np.ndarray:
    blocks = []
    for start in range(0, len(clips), batch_size):
        waveforms = []
        rates = []
        for clip in clips[start : start + batch_size]:
            waveform, rate = load_clip(clip.path, crop_seconds)
            waveforms.append(waveform)
            rates.append(rate)
        block = np.asarray(encoder.encode_audio(waveforms, rates))
        blocks.append(np.atleast_2d(block))
    return np.vstack(blocks)


def _check_width(label: str, rows: np.ndarray, n_expected: int, dim: int) -> None:
    if rows.shape != (n_expected, dim):
        raise EncoderShapeError(
            f"{label} encoder returned shape {rows.shape}, expected "
            f"({n_expected}, {dim}) for advertised width {dim}"
        )
    if not np.all(np.isfinite(rows)):
        raise EncoderShapeError(f"{label} encoder returned non-finite values")


def _group_ids(clips: list[CaptionedClip]):
    counts = [len(clip.captions) for clip in clips]
    if len(set(counts)) == 1:
        return {"captions_per_item": counts[0], "num_items": len(clips)}
    return [g for g, count in enumerate(counts) for _ in range(count)]


def export(job: ExportJob) -> Path:
    """Run one export job; returns the written manifest path."""
    clips = load_split(job.dataset_root, job.split)
    encoder = resolve_encoder(job.checkpoint)
    dim = int(encoder.embedding_dim)

    text_rows = _encode_texts(encoder, clips, job.batch_size)
    n_captions = sum(len(clip.captions) for clip in clips)
    _check_width("text", text_rows, n_captions, dim)

    audio_rows = _encode_audio(encoder, clips, job.crop_seconds, job.batch_size)
    _check_width("audio", audio_rows, len(clips), dim)

    out = Path(job.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_npy(out / "text.npy", text_rows, job.precision)
    _write_npy(out / "audio.npy", audio_rows, job.precision)

    manifest = {
        "name": f"{Path(job.dataset_root).name}-{job.split}",
        "text": "text.npy",
        "audio": "audio.npy",
        "group_ids": _group_ids(clips),
        "texts": [caption for clip in clips for caption in clip.captions],
        "export": {
            "checkpoint": job.checkpoint,
            "checkpoint_sha256": resolve_checksum(job.checkpoint),
            "split": job.split,
            "crop_seconds": job.crop_seconds,
            "embedding_dim": dim,
            "n_items": len(clips),
            "n_captions": n_captions,
            "precision": job.precision,
            "tool_version": __version__,
        },
    }
    manifest_path = out / "manifest.json"
    _atomic_bytes(manifest_path, (json.dumps(manifest, indent=2) + "\n").encode("utf-8"))
    return manifest_path
