"""Tensor and dataset I/O.

Embedding stacks travel as NPY v1.0 files (little-endian float32/float64,
C-order, 2-D) and a paired dataset is described by a small JSON manifest that
names the two tensor files and the group structure pairing their rows.

All arrays are widened to float64 on load; file writes go through a temporary
file in the destination directory followed by an atomic rename, so readers
never observe a half-written file.
"""

from __future__ import annotations

import json
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from numpy.lib import format as _npy_format

from .errors import (
    GroupError,
    MalformedHeaderError,
    NonFiniteDataError,
    PairingError,
    ShapeError,
    UnsupportedDtypeError,
    ZeroRowWarning,
)

NPY_MAGIC = b"\x93NUMPY"
_PRECISION_DTYPES = {"f32": "<f4", "f64": "<f8"}


class Modality(Enum):
    """Which encoder produced an embedding stack."""

    TEXT = "text"
    AUDIO = "audio"


@dataclass(frozen=True)
class EmbeddingMatrix:
    """A stack of embeddings: one row per item, float64 internally.

    Args:
        data: array-like of shape (N, C) with N >= 1 and C >= 2; copied and
            widened to float64.
        modality: which encoder the rows came from.

    Raises:
        ShapeError: if ``data`` is not 2-D or is smaller than 1 x 2.
        NonFiniteDataError: if any entry is NaN or infinite.
    """

    data: np.ndarray
    modality: Modality

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if data.ndim != 2:
            raise ShapeError(f"embedding stack must be 2-D, got {data.ndim}-D")
        if data.shape[0] < 1 or data.shape[1] < 2:
            raise ShapeError(
                f"embedding stack must be at least 1 x 2, got {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise NonFiniteDataError("embedding stack contains NaN or Inf")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        """Number of rows (items)."""
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        """Embedding width C."""
        return self.data.shape[1]


def read_tensor(path: str | os.PathLike, modality: Modality = Modality.TEXT) -> EmbeddingMatrix:
    """Read a 2-D float tensor from an NPY v1.0 file.

    Accepts float32/float64 payloads of either byte order and widens them to
    native float64. Fortran-order payloads are re-laid-out to C order.

    Args:
        path: file to read.
        modality: modality tag to attach to the result (the file format does
            not carry one, so the caller states the role of the tensor).

    Returns:
        The loaded stack as an :class:`EmbeddingMatrix`.

    Raises:
        MalformedHeaderError: bad magic, unsupported format version, an
            unparsable header, or a truncated payload.
        UnsupportedDtypeError: dtype other than 4- or 8-byte IEEE float.
        ShapeError: payload is not 2-D with at least 1 row and 2 columns.
        NonFiniteDataError: payload contains NaN or Inf.
    """
    with open(path, "rb") as fh:
        magic = fh.read(len(NPY_MAGIC))
        if magic != NPY_MAGIC:
            raise MalformedHeaderError(f"{path}: not an NPY file (bad magic)")
        version = fh.read(2)
        if version != b"\x01\x00":
            raise MalformedHeaderError(
                f"{path}: unsupported NPY version {tuple(version)!r}, expected 1.0"
            )
        try:
            shape, fortran_order, dtype = _npy_format.read_array_header_1_0(fh)
        except ValueError as exc:
            raise MalformedHeaderError(f"{path}: bad NPY header: {exc}") from exc
        if dtype.kind != "f" or dtype.itemsize not in (4, 8):
            raise UnsupportedDtypeError(
                f"{path}: dtype {dtype.str!r} not supported; expected float32 or float64"
            )
        if len(shape) != 2:
            raise ShapeError(f"{path}: expected a 2-D tensor, got shape {shape}")
        count = int(shape[0]) * int(shape[1])
        payload = fh.read(count * dtype.itemsize)
        if len(payload) != count * dtype.itemsize:
            raise MalformedHeaderError(
                f"{path}: truncated payload ({len(payload)} bytes, "
                f"expected {count * dtype.itemsize})"
            )
    flat = np.frombuffer(payload, dtype=dtype, count=count)
    order = "F" if fortran_order else "C"
    data = flat.reshape(shape, order=order).astype(np.float64)
    return EmbeddingMatrix(data, modality)


def write_tensor(
    path: str | os.PathLike,
    matrix: EmbeddingMatrix | np.ndarray,
    precision: str = "f64",
) -> None:
    """Write a 2-D float tensor as an NPY v1.0 file, atomically.

    Args:
        path: destination file.
        matrix: stack to write — an :class:`EmbeddingMatrix` or any finite
            2-D array (plain arrays may be narrower than 1 x 2).
        precision: ``"f32"`` or ``"f64"``; the payload is stored little-endian
            C-order in that width.

    Raises:
        ShapeError: a plain array is not 2-D or has no elements.
        NonFiniteDataError: a plain array contains NaN or Inf.
    """
    if precision not in _PRECISION_DTYPES:
        raise ValueError(f"precision must be 'f32' or 'f64', got {precision!r}")
    if isinstance(matrix, EmbeddingMatrix):
        data = matrix.data
    else:
        data = np.asarray(matrix, dtype=np.float64)
        if data.ndim != 2:
            raise ShapeError(f"tensor must be 2-D, got {data.ndim}-D")
        if data.size == 0:
            raise ShapeError(f"tensor must be non-empty, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NonFiniteDataError("tensor contains NaN or Inf")
    payload = np.ascontiguousarray(data.astype(_PRECISION_DTYPES[precision]))
    _atomic_npy_write(path, payload)


def _atomic_npy_write(path: str | os.PathLike, array: np.ndarray) -> None:
    """Serialize ``array`` as NPY v1.0 to ``path`` via temp-file + rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".npy.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            _npy_format.write_array(fh, array, version=(1, 0))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path: str | os.PathLike, blob: bytes) -> None:
    """Write ``blob`` to ``path`` via temp-file + rename in the same directory."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path: str | os.PathLike, obj) -> None:
    """Serialize ``obj`` as stable, human-readable JSON and write atomically."""
    atomic_write_bytes(path, (json.dumps(obj, indent=2) + "\n").encode("utf-8"))


@dataclass(frozen=True)
class DatasetManifest:
    """Description of a paired text/audio dataset on disk.

    Attributes:
        name: free-form dataset label.
        text_path: NPY file with one text embedding per caption row.
        audio_path: NPY file with either one audio embedding per caption row
            or one per group (expanded on load).
        group_ids: per-caption group id; rows of the same group must form one
            contiguous run.
        item_texts: optional raw caption strings, one per row.
    """

    name: str
    text_path: Path
    audio_path: Path
    group_ids: list[int]
    item_texts: list[str] | None = None


def _check_contiguous_runs(group_ids) -> None:
    """Raise GroupError unless equal ids form single contiguous runs."""
    seen: set[int] = set()
    prev: object = object()
    for gid in group_ids:
        if gid != prev:
            if gid in seen:
                raise GroupError(
                    f"group id {gid!r} appears in two separate runs; "
                    "rows of one group must be contiguous"
                )
            seen.add(gid)
            prev = gid


def read_manifest(path: str | os.PathLike) -> DatasetManifest:
    """Load a dataset manifest from JSON.

    Tensor paths inside the manifest are resolved relative to the manifest's
    own directory. ``group_ids`` may be given either as an explicit list or in
    the compact form ``{"captions_per_item": g, "num_items": m}``, which
    expands to ``[0]*g + [1]*g + ...``.

    Raises:
        GroupError: missing/invalid group specification or non-contiguous runs.
        PairingError: ``texts`` present but not a list of strings.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedHeaderError(f"{path}: manifest is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise MalformedHeaderError(f"{path}: manifest must be a JSON object")
    for key in ("text", "audio", "group_ids"):
        if key not in raw:
            raise GroupError(f"{path}: manifest is missing required key {key!r}")
    base = path.parent
    groups_spec = raw["group_ids"]
    if isinstance(groups_spec, dict):
        try:
            per = int(groups_spec["captions_per_item"])
            num = int(groups_spec["num_items"])
        except (KeyError, TypeError, ValueError) as exc:
            raise GroupError(
                f"{path}: compact group spec needs integer "
                "'captions_per_item' and 'num_items'"
            ) from exc
        if per < 1 or num < 1:
            raise GroupError(f"{path}: compact group spec must be positive, got {groups_spec}")
        group_ids = [i for i in range(num) for _ in range(per)]
    elif isinstance(groups_spec, list):
        if not all(isinstance(g, int) and not isinstance(g, bool) for g in groups_spec):
            raise GroupError(f"{path}: group_ids list must contain integers")
        group_ids = list(groups_spec)
    else:
        raise GroupError(f"{path}: group_ids must be a list or a compact spec object")
    if not group_ids:
        raise GroupError(f"{path}: group_ids is empty")
    _check_contiguous_runs(group_ids)
    item_texts = raw.get("texts")
    if item_texts is not None:
        if not isinstance(item_texts, list) or not all(isinstance(t, str) for t in item_texts):
            raise PairingError(f"{path}: 'texts' must be a list of strings")
        if len(item_texts) != len(group_ids):
            raise PairingError(
                f"{path}: {len(item_texts)} texts but {len(group_ids)} group ids"
            )
    return DatasetManifest(
        name=str(raw.get("name", path.stem)),
        text_path=base / raw["text"],
        audio_path=base / raw["audio"],
        group_ids=group_ids,
        item_texts=item_texts,
    )


def write_manifest(
    path: str | os.PathLike,
    *,
    name: str,
    text: str,
    audio: str,
    group_ids,
    texts: list[str] | None = None,
) -> None:
    """Write a dataset manifest as JSON (paths are kept as given, relative).

    ``group_ids`` may be a list or the compact ``{"captions_per_item", "num_items"}``
    form; it is stored verbatim.
    """
    obj: dict = {"name": name, "text": text, "audio": audio, "group_ids": group_ids}
    if texts is not None:
        obj["texts"] = list(texts)
    atomic_write_json(path, obj)


@dataclass(frozen=True)
class PairedDataset:
    """N text rows and N audio rows paired one-to-one, plus group structure.

    Attributes:
        text: (N, C) text embeddings.
        audio: (N, C) audio embeddings (already expanded so row i pairs with
            text row i).
        groups: (N,) int64 group id per row; equal ids are contiguous.
        texts: optional raw caption strings, one per row.
        name: dataset label.
    """

    text: EmbeddingMatrix
    audio: EmbeddingMatrix
    groups: np.ndarray
    texts: list[str] | None = None
    name: str = ""

    def __post_init__(self) -> None:
        groups = np.asarray(self.groups, dtype=np.int64)
        if groups.ndim != 1:
            raise GroupError("groups must be a 1-D integer array")
        if self.text.modality is not Modality.TEXT:
            raise PairingError("text matrix must have TEXT modality")
        if self.audio.modality is not Modality.AUDIO:
            raise PairingError("audio matrix must have AUDIO modality")
        if self.text.n != self.audio.n:
            raise PairingError(
                f"text has {self.text.n} rows but audio has {self.audio.n}"
            )
        if groups.shape[0] != self.text.n:
            raise PairingError(
                f"{groups.shape[0]} group ids for {self.text.n} rows"
            )
        if self.text.dim != self.audio.dim:
            raise PairingError(
                f"text width {self.text.dim} != audio width {self.audio.dim}"
            )
        _check_contiguous_runs(groups.tolist())
        if self.texts is not None and len(self.texts) != self.text.n:
            raise PairingError(
                f"{len(self.texts)} caption strings for {self.text.n} rows"
            )
        groups.setflags(write=False)
        object.__setattr__(self, "groups", groups)

    @property
    def n(self) -> int:
        """Number of paired rows."""
        return self.text.n

    @property
    def dim(self) -> int:
        """Embedding width."""
        return self.text.dim

    def group_run_starts(self) -> np.ndarray:
        """Indices where each group's contiguous run begins (in row order)."""
        g = self.groups
        starts = np.flatnonzero(np.concatenate(([True], g[1:] != g[:-1])))
        return starts

    @property
    def n_groups(self) -> int:
        """Number of distinct groups."""
        return int(self.group_run_starts().shape[0])


def load_dataset(manifest: DatasetManifest | str | os.PathLike) -> PairedDataset:
    """Materialize a :class:`PairedDataset` from a manifest (path or object).

    If the audio tensor has one row per *group*, each row is repeated over its
    group's caption rows so that audio row i pairs with text row i; any other
    row-count mismatch raises :class:`PairingError`.
    """
    if not isinstance(manifest, DatasetManifest):
        manifest = read_manifest(manifest)
    text = read_tensor(manifest.text_path, Modality.TEXT)
    audio = read_tensor(manifest.audio_path, Modality.AUDIO)
    groups = np.asarray(manifest.group_ids, dtype=np.int64)
    n = groups.shape[0]
    if text.n != n:
        raise PairingError(
            f"{manifest.text_path}: {text.n} text rows but {n} group ids"
        )
    starts = np.flatnonzero(np.concatenate(([True], groups[1:] != groups[:-1])))
    counts = np.diff(np.concatenate((starts, [n])))
    if audio.n == n:
        audio_full = audio
    elif audio.n == starts.shape[0]:
        audio_full = EmbeddingMatrix(
            np.repeat(audio.data, counts, axis=0), Modality.AUDIO
        )
    else:
        raise PairingError(
            f"{manifest.audio_path}: {audio.n} audio rows cannot pair with "
            f"{n} caption rows in {starts.shape[0]} groups"
        )
    return PairedDataset(
        text=text,
        audio=audio_full,
        groups=groups,
        texts=manifest.item_texts,
        name=manifest.name,
    )


def l2_normalize_rows(array: np.ndarray) -> np.ndarray:
    """Return a copy of ``array`` with each row scaled to unit Euclidean norm.

    Rows with exactly zero norm are left unchanged and a
    :class:`ZeroRowWarning` is emitted.
    """
    array = np.asarray(array, dtype=np.float64)
    norms = np.linalg.norm(array, axis=-1, keepdims=True)
    zero = norms == 0.0
    if np.any(zero):
        warnings.warn(
            f"{int(zero.sum())} zero-norm row(s) left unnormalized",
            ZeroRowWarning,
            stacklevel=2,
        )
    return array / np.where(zero, 1.0, norms)
