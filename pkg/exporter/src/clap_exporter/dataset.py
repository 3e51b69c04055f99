"""Captioned-audio dataset listing (Clotho-style layout).

Expected on disk, under a dataset root:

- audio files in ``<root>/<split>/``
- a captions CSV with a ``file_name`` column plus ``caption_1..caption_k``
  columns, found as ``clotho_captions_<split>.csv``,
  ``<split>_captions.csv``, or ``<split>.csv`` in the root.

Items keep the CSV row order; captions keep column order. Both orders carry
through to the exported tensors, so row i of the audio tensor is the i-th CSV
row and its captions occupy one contiguous block of text rows.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import MissingDatasetError

_CAPTION_COLUMN = re.compile(r"^caption_(\d+)$")


@dataclass(frozen=True)
class CaptionedClip:
    """One audio file plus its caption strings, in dataset order."""

    file_name: str
    path: Path
    captions: tuple[str, ...]


def _captions_csv(root: Path, split: str) -> Path:
    candidates = [
        root / f"clotho_captions_{split}.csv",
        root / f"{split}_captions.csv",
        root / f"{split}.csv",
    ]
    for candidate in candidates:
        if candidate.is_file():
            return candidate
    raise MissingDatasetError(
        f"no captions CSV for split {split!r} under {root} "
        f"(tried {', '.join(c.name for c in candidates)})"
    )


def load_split(root: str | Path, split: str) -> list[CaptionedClip]:
    """List one split's clips with captions, in CSV order.

    Raises:
        MissingDatasetError: missing root, split directory, captions CSV,
            caption columns, or any referenced audio file; empty split;
            blank caption cells.
    """
    root = Path(root)
    if not root.is_dir():
        raise MissingDatasetError(f"dataset root not found: {root}")
    audio_dir = root / split
    if not audio_dir.is_dir():
        raise MissingDatasetError(f"split directory not found: {audio_dir}")
    csv_path = _captions_csv(root, split)

    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if "file_name" not in header:
            raise MissingDatasetError(f"{csv_path}: missing 'file_name' column")
        caption_columns = sorted(
            (c for c in header if _CAPTION_COLUMN.match(c)),
            key=lambda c: int(_CAPTION_COLUMN.match(c).group(1)),
        )
        if not caption_columns:
            raise MissingDatasetError(f"{csv_path}: no caption_<i> columns")
        clips: list[CaptionedClip] = []
        for line_no, row in enumerate(reader, start=2):
            file_name = (row.get("file_name") or "").strip()
            if not file_name:
                raise MissingDatasetError(f"{csv_path}:{line_no}: empty file_name")
            captions = tuple((row.get(c) or "").strip() for c in caption_columns)
            if any(not c for c in captions):
                raise MissingDatasetError(
                    f"{csv_path}:{line_no}: blank caption for {file_name!r}"
                )
            path = audio_dir / file_name
            if not path.is_file():
                raise MissingDatasetError(f"{csv_path}:{line_no}: audio file not found: {path}")
            clips.append(CaptionedClip(file_name=file_name, path=path, captions=captions))
    if not clips:
        raise MissingDatasetError(f"{csv_path}: split {split!r} lists no items")
    return clips
