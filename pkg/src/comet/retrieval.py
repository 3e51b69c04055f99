"""Cross-modal retrieval evaluation.

Queries are ranked against a gallery by inner product of unit-normalized
rows, with deterministic tie-breaking toward lower gallery indices. Metrics
follow the usual cross-modal conventions: Recall@{1,5,10,50} (percent of
queries whose best-ranked relevant item is within the cutoff), mean and
median of the best relevant rank, and mAP@10 with the per-query average
precision normalized by ``min(#relevant, 10)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .decomposition import Coefficients
from .errors import DimensionMismatchError, NoPositivesError
from .io import EmbeddingMatrix, PairedDataset, l2_normalize_rows

RECALL_CUTOFFS = (1, 5, 10, 50)
MAP_CUTOFF = 10
MAP_DENOMINATOR = "min(n_relevant, 10)"


class Direction(Enum):
    """Which modality queries which."""

    TEXT_TO_AUDIO = "text_to_audio"
    AUDIO_TO_TEXT = "audio_to_text"


@dataclass(frozen=True)
class RetrievalMetrics:
    """Aggregate retrieval quality for one query direction.

    ``r_at[k]`` is in percent; ``mean_rank``/``median_rank`` are 1-based
    best-relevant ranks (median averages the two central values for even
    query counts); ``map_at_10`` is percent.
    """

    r_at: dict[int, float]
    mean_rank: float
    median_rank: float
    map_at_10: float
    n_queries: int
    n_gallery: int
    direction: Direction | None = None


def _rows(x: np.ndarray | EmbeddingMatrix | Coefficients) -> np.ndarray:
    if isinstance(x, EmbeddingMatrix):
        return x.data
    if isinstance(x, Coefficients):
        return x.values
    return np.atleast_2d(np.asarray(x, dtype=np.float64))


def similarity_matrix(
    queries: np.ndarray | EmbeddingMatrix | Coefficients,
    gallery: np.ndarray | EmbeddingMatrix | Coefficients,
) -> np.ndarray:
    """Cosine similarities: rows are unit-normalized, then inner products.

    Zero rows are left at norm zero (their similarities are all 0) with a
    warning.
    """
    q = _rows(queries)
    g = _rows(gallery)
    if q.shape[1] != g.shape[1]:
        raise DimensionMismatchError(
            f"query width {q.shape[1]} != gallery width {g.shape[1]}"
        )
    return l2_normalize_rows(q) @ l2_normalize_rows(g).T


def evaluate(
    sim: np.ndarray,
    relevance: list[set[int]],
    direction: Direction | None = None,
) -> RetrievalMetrics:
    """Score a similarity matrix against per-query relevant gallery sets.

    For each query, gallery items are ranked by descending similarity with
    ties broken toward the lower index; the query's rank is that of its
    best-ranked relevant item (1-based). AP@10 sums precision at each
    relevant hit within the top 10 and divides by ``min(#relevant, 10)``.

    Raises:
        NoPositivesError: some query has an empty relevant set.
        DimensionMismatchError: relevance length != number of query rows.
    """
    sim = np.asarray(sim, dtype=np.float64)
    if sim.ndim != 2:
        raise DimensionMismatchError(f"similarity matrix must be 2-D, got {sim.ndim}-D")
    n_queries, n_gallery = sim.shape
    if len(relevance) != n_queries:
        raise DimensionMismatchError(
            f"{len(relevance)} relevance sets for {n_queries} queries"
        )
    order = np.argsort(-sim, axis=1, kind="stable")
    positions = np.empty_like(order)
    rows = np.arange(n_queries)[:, None]
    positions[rows, order] = np.arange(n_gallery)[None, :]

    # Ranks are exact integers and average precisions are accumulated in
    # ascending-depth order, so the aggregates below are reproducible
    # bit-for-bit regardless of platform BLAS or summation strategy.
    best_rank: list[int] = []
    ap10: list[float] = []
    for i, relevant in enumerate(relevance):
        if not relevant:
            raise NoPositivesError(f"query {i} has no relevant gallery items")
        idx = np.fromiter(relevant, dtype=np.int64)
        if idx.min() < 0 or idx.max() >= n_gallery:
            raise NoPositivesError(
                f"query {i} lists relevant item outside gallery of size {n_gallery}"
            )
        best_rank.append(int(positions[i, idx].min()) + 1)
        hits = 0
        precision_sum = 0.0
        for depth, g in enumerate(order[i, :MAP_CUTOFF], start=1):
            if int(g) in relevant:
                hits += 1
                precision_sum += hits / depth
        ap10.append(precision_sum / min(len(relevant), MAP_CUTOFF))

    ranked = sorted(best_rank)
    mid = n_queries // 2
    if n_queries % 2:
        median = float(ranked[mid])
    else:
        median = (ranked[mid - 1] + ranked[mid]) / 2
    return RetrievalMetrics(
        r_at={
            k: 100.0 * sum(r <= k for r in best_rank) / n_queries
            for k in RECALL_CUTOFFS
        },
        mean_rank=sum(best_rank) / n_queries,
        median_rank=median,
        map_at_10=100.0 * sum(ap10) / n_queries,
        n_queries=n_queries,
        n_gallery=n_gallery,
        direction=direction,
    )


def protocol_from_arrays(
    text_rows: np.ndarray,
    audio_rows: np.ndarray,
    groups: np.ndarray,
    direction: Direction,
) -> tuple[np.ndarray, np.ndarray, list[set[int]]]:
    """Build (queries, gallery, relevance) from paired rows and group ids.

    Text-to-audio: every text row queries a gallery of one audio row per
    group (the first row of each contiguous run); the single relevant item is
    the query's own group. Audio-to-text: one query per group against the
    full text gallery; every text row of the group is relevant.
    """
    text_rows = np.asarray(text_rows, dtype=np.float64)
    audio_rows = np.asarray(audio_rows, dtype=np.float64)
    groups = np.asarray(groups, dtype=np.int64)
    starts = np.flatnonzero(np.concatenate(([True], groups[1:] != groups[:-1])))
    n = groups.shape[0]
    run_of_row = np.cumsum(np.concatenate(([0], (groups[1:] != groups[:-1]).astype(np.int64))))
    if direction is Direction.TEXT_TO_AUDIO:
        queries = text_rows
        gallery = audio_rows[starts]
        relevance = [{int(run_of_row[i])} for i in range(n)]
    else:
        queries = audio_rows[starts]
        gallery = text_rows
        ends = np.concatenate((starts[1:], [n]))
        relevance = [
            set(range(int(lo), int(hi))) for lo, hi in zip(starts, ends)
        ]
    return queries, gallery, relevance


def build_protocol(
    dataset: PairedDataset, direction: Direction
) -> tuple[np.ndarray, np.ndarray, list[set[int]]]:
    """Standard protocol on a paired dataset's raw embeddings.

    See :func:`protocol_from_arrays`; the audio gallery takes one row per
    group (rows within a group are replicas of the same recording).
    """
    return protocol_from_arrays(
        dataset.text.data, dataset.audio.data, dataset.groups, direction
    )


def evaluate_dataset(
    text_rows: np.ndarray,
    audio_rows: np.ndarray,
    groups: np.ndarray,
    direction: Direction,
) -> RetrievalMetrics:
    """Protocol + similarity + scoring in one call, on any representation."""
    queries, gallery, relevance = protocol_from_arrays(
        text_rows, audio_rows, groups, direction
    )
    sim = similarity_matrix(queries, gallery)
    return evaluate(sim, relevance, direction)
