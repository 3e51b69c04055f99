"""Plain helper functions shared across test modules."""

from __future__ import annotations

import numpy as np

from comet import EmbeddingMatrix, Modality, PairedDataset

# Per-criterion verdict lines accumulated by the acceptance module and echoed
# in the terminal summary (see conftest.pytest_terminal_summary).
ACCEPTANCE_LOG: list[str] = []


def make_dataset(
    text: np.ndarray,
    audio: np.ndarray,
    groups: np.ndarray | None = None,
    texts: list[str] | None = None,
    name: str = "test",
) -> PairedDataset:
    """Wrap raw arrays into a PairedDataset with default 1:1 groups."""
    if groups is None:
        groups = np.arange(text.shape[0])
    return PairedDataset(
        text=EmbeddingMatrix(text, Modality.TEXT),
        audio=EmbeddingMatrix(audio, Modality.AUDIO),
        groups=np.asarray(groups),
        texts=texts,
        name=name,
    )


def unit_rows(rng: np.random.Generator, n: int, c: int) -> np.ndarray:
    """Random rows on the unit sphere."""
    rows = rng.normal(size=(n, c))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def correlated_pair(
    rng: np.random.Generator, n: int, c: int, strength: float = 0.6
) -> tuple[np.ndarray, np.ndarray]:
    """Two unit-row stacks sharing a latent component — realistic fit input."""
    shared = rng.normal(size=(n, c))
    text = strength * shared + (1 - strength) * rng.normal(size=(n, c))
    audio = strength * shared + (1 - strength) * rng.normal(size=(n, c))
    text /= np.linalg.norm(text, axis=1, keepdims=True)
    audio /= np.linalg.norm(audio, axis=1, keepdims=True)
    return text, audio
