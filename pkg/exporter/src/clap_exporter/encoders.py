"""Encoder resolution.

An encoder is anything with::

    embedding_dim: int
    encode_text(captions: list[str]) -> np.ndarray            # (B, C)
    encode_audio(waveforms: list[np.ndarray],                 # mono float64
                 rates: list[int]) -> np.ndarray              # (B, C)

Outputs are raw (unnormalized) embedding rows; any normalization is the
consumer's decision. Checkpoint ids select an implementation:

- ``toy`` / ``toy:<dim>`` — a dependency-free, content-keyed deterministic
  encoder for smoke tests and pipeline validation.
- ``module:<import.path>:<factory>[:<arg>]`` — import ``factory`` from
  ``import.path`` and call it (with ``arg`` if given) to obtain the encoder.
  This is the hook for real pretrained checkpoints, whose runtimes (torch
  et al.) stay out of this package's dependencies; the factory owns loading,
  resampling, and batching details for its model.

When a checkpoint id (or a ``module:`` arg) names an existing file, its
SHA-256 is resolved so the export manifest can pin exactly which weights
produced the tensors.
"""

from __future__ import annotations

import hashlib
from importlib import import_module
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import MissingCheckpointError

_DEFAULT_TOY_DIM = 32


@runtime_checkable
class TextAudioEncoder(Protocol):
    embedding_dim: int

    def encode_text(self, captions: list[str]) -> np.ndarray: ...

    def encode_audio(
        self, waveforms: list[np.ndarray], rates: list[int]
    ) -> np.ndarray: ...


class HashEncoder:
    """Deterministic stand-in encoder keyed on input content.

    Each caption (or waveform) is hashed and the digest seeds a PRNG that
    draws one standard-normal row, so equal inputs always map to equal rows,
    different inputs to unrelated ones, and nothing is normalized. Waveforms
    are quantized before hashing so the key depends only on the decoded
    samples, not on intermediate float formatting.
    """

    def __init__(self, embedding_dim: int = _DEFAULT_TOY_DIM) -> None:
        if embedding_dim < 2:
            raise MissingCheckpointError(
                f"toy encoder width must be >= 2, got {embedding_dim}"
            )
        self.embedding_dim = int(embedding_dim)

    def _row(self, key: bytes) -> np.ndarray:
        digest = hashlib.blake2b(key, digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        return rng.standard_normal(self.embedding_dim)

    def encode_text(self, captions: list[str]) -> np.ndarray:
        rows = [self._row(b"text\0" + c.encode("utf-8")) for c in captions]
        return np.asarray(rows, dtype=np.float64)

    def encode_audio(
        self, waveforms: list[np.ndarray], rates: list[int]
    ) -> np.ndarray:
        rows = []
        for waveform, rate in zip(waveforms, rates):
            quantized = np.round(np.asarray(waveform, dtype=np.float64) * 32768.0)
            key = (
                b"audio\0"
                + int(rate).to_bytes(4, "little")
                + quantized.astype("<i4").tobytes()
            )
            rows.append(self._row(key))
        return np.asarray(rows, dtype=np.float64)


def _load_factory_encoder(spec: str) -> TextAudioEncoder:
    parts = spec.split(":", 3)  # module : import.path : factory [: arg]
    if len(parts) < 3 or not parts[1] or not parts[2]:
        raise MissingCheckpointError(
            f"malformed module checkpoint {spec!r}; expected "
            "'module:<import.path>:<factory>[:<arg>]'"
        )
    _, module_path, factory_name, *arg = parts
    try:
        module = import_module(module_path)
    except ImportError as exc:
        raise MissingCheckpointError(
            f"cannot import encoder module {module_path!r}: {exc}"
        ) from exc
    factory = getattr(module, factory_name, None)
    if factory is None:
        raise MissingCheckpointError(
            f"module {module_path!r} has no attribute {factory_name!r}"
        )
    encoder = factory(arg[0]) if arg else factory()
    if not isinstance(encoder, TextAudioEncoder):
        raise MissingCheckpointError(
            f"{module_path}:{factory_name} returned an object without the "
            "encoder interface (embedding_dim, encode_text, encode_audio)"
        )
    return encoder


def resolve_encoder(checkpoint: str) -> TextAudioEncoder:
    """Turn a checkpoint id into an encoder instance.

    Raises:
        MissingCheckpointError: unknown scheme, bad module spec, or a bare
            file path (weights alone don't identify a runtime; pass them as
            the ``module:`` factory argument instead).
    """
    if checkpoint == "toy":
        return HashEncoder()
    if checkpoint.startswith("toy:"):
        tail = checkpoint.partition(":")[2]
        try:
            dim = int(tail)
        except ValueError:
            raise MissingCheckpointError(
                f"bad toy width in checkpoint id {checkpoint!r}"
            ) from None
        return HashEncoder(dim)
    if checkpoint.startswith("module:"):
        return _load_factory_encoder(checkpoint)
    if Path(checkpoint).exists():
        raise MissingCheckpointError(
            f"{checkpoint!r} is a file, but a weights file alone does not "
            "select a runtime; wire it through "
            "'module:<import.path>:<factory>:{path}'".format(path=checkpoint)
        )
    raise MissingCheckpointError(
        f"unknown checkpoint id {checkpoint!r}; use 'toy[:<dim>]' or "
        "'module:<import.path>:<factory>[:<arg>]'"
    )


def resolve_checksum(checkpoint: str) -> str | None:
    """SHA-256 of the weights file a checkpoint id points at, if any.

    Checks the id itself and, for ``module:`` ids, the factory argument.
    Returns None when neither names an existing file.
    """
    candidates = [checkpoint]
    if checkpoint.startswith("module:"):
        parts = checkpoint.split(":", 3)
        if len(parts) == 4:
            candidates.append(parts[3])
    for candidate in candidates:
        path = Path(candidate)
        if path.is_file():
            digest = hashlib.sha256()
            with open(path, "rb") as fh:
                for block in iter(lambda: fh.read(1 << 20), b""):
                    digest.update(block)
            return digest.hexdigest()
    return None
