"""Diagnostics over a fitted paired-direction model.

Everything here reads a fitted :class:`~comet.decomposition.DissectionModel`
plus (optionally) a dataset and reports interpretable per-direction numbers:
the shared spectrum, how well the two bases agree direction by direction, how
the per-direction covariance factors into correlation times spreads, how much
of a text-audio inner product flows through matched directions versus leaking
across mismatched ones, and which captions sit at the extremes of a direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decomposition import Coefficients, DissectionModel, project
from .errors import (
    BadKError,
    DimensionMismatchError,
    MissingTextsError,
)
from .io import PairedDataset


def spectrum(model: DissectionModel) -> np.ndarray:
    """The shared spectrum (unnormalized; divide by n_train for covariance)."""
    return model.sigma.copy()


def uv_alignments(model: DissectionModel) -> np.ndarray:
    """Per-direction basis agreement: ``w[j] = U[:, j] · V[:, j]`` in [-1, 1]."""
    return np.einsum("ij,ij->j", model.U, model.V)


def uv_matrix(model: DissectionModel, absolute: bool = False) -> np.ndarray:
    """Full cross-basis Gram matrix ``Uᵀ V`` (optionally entrywise absolute)."""
    G = model.U.T @ model.V
    return np.abs(G) if absolute else G


def net_useful_contribution(model: DissectionModel) -> np.ndarray:
    """Per-direction signal actually transferred between modalities.

    ``sigma[j] * (U[:, j] · V[:, j])``: a large spectrum value on a direction
    whose bases disagree contributes little (or negatively) to cross-modal
    inner products, and this product exposes that.
    """
    return model.sigma * uv_alignments(model)


@dataclass(frozen=True)
class CovarianceDecomposition:
    """Per-direction factorization of the shared covariance.

    For each direction j, ``sqrt_cov[j]`` is ``sqrt(sigma[j] / n_train)`` from
    the model, and the dataset-side factors satisfy
    ``corr[j] * text_std[j] * audio_std[j] = dataset covariance on j``.
    ``degenerate`` flags directions where either spread vanishes (corr set
    to 0 there). ``consistent_with_model`` is False when the dataset's
    per-direction covariances do not reproduce the model spectrum (i.e. the
    dataset is not the fitting set).
    """

    sqrt_cov: np.ndarray
    text_std: np.ndarray
    audio_std: np.ndarray
    corr: np.ndarray
    degenerate: np.ndarray
    consistent_with_model: bool


def covariance_decomposition(
    model: DissectionModel, dataset: PairedDataset
) -> CovarianceDecomposition:
    """Factor each direction's covariance into correlation times spreads.

    Spreads use the biased convention ``sqrt(xᵀx / n)`` over coordinates
    centered on the *model* means (so on the fitting set the per-direction
    covariance equals ``sigma[j] / n_train`` exactly).
    """
    t_hat = project(model, dataset.text).values
    a_hat = project(model, dataset.audio).values
    n = dataset.n
    cov = np.einsum("ij,ij->j", t_hat, a_hat) / n
    text_std = np.sqrt(np.einsum("ij,ij->j", t_hat, t_hat) / n)
    audio_std = np.sqrt(np.einsum("ij,ij->j", a_hat, a_hat) / n)
    denom = text_std * audio_std
    degenerate = denom == 0.0
    corr = np.zeros_like(cov)
    np.divide(cov, denom, out=corr, where=~degenerate)
    corr = np.clip(corr, -1.0, 1.0)
    scale = model.sigma[0] / model.n_train if model.sigma[0] > 0 else 1.0
    consistent = bool(
        np.max(np.abs(cov - model.sigma / model.n_train)) <= 1e-6 * scale
    )
    return CovarianceDecomposition(
        sqrt_cov=np.sqrt(model.sigma / model.n_train),
        text_std=text_std,
        audio_std=audio_std,
        corr=corr,
        degenerate=degenerate,
        consistent_with_model=consistent,
    )


@dataclass(frozen=True)
class SubspaceNorms:
    """Mean coefficient-block norms for one 1-based inclusive index range."""

    index_range: tuple[int, int]
    mean_norm_text: float | None = None
    mean_norm_audio: float | None = None


def _block_mean_norm(coeffs: Coefficients, start: int, end: int) -> float:
    """Mean over rows of the Euclidean norm of columns start..end (1-based)."""
    if coeffs.offset != 0:
        raise ValueError("subspace norms need coefficients starting at direction 0")
    if not 1 <= start <= end <= coeffs.width:
        raise BadKError(
            f"range ({start}, {end}) outside [1, {coeffs.width}]"
        )
    block = coeffs.values[:, start - 1 : end]
    return float(np.mean(np.linalg.norm(block, axis=1)))


def subspace_norms(
    ranges: list[tuple[int, int]],
    text: Coefficients | None = None,
    audio: Coefficients | None = None,
) -> list[SubspaceNorms]:
    """Average norm of coefficient blocks over 1-based inclusive index ranges.

    For each ``(start, end)`` range and each supplied modality, computes the
    mean over items of ``||values[i, start-1:end]||``. Either modality may be
    omitted (its field is then None).
    """
    if text is None and audio is None:
        raise ValueError("at least one of text/audio coefficients is required")
    out = []
    for start, end in ranges:
        out.append(
            SubspaceNorms(
                index_range=(start, end),
                mean_norm_text=None if text is None else _block_mean_norm(text, start, end),
                mean_norm_audio=None if audio is None else _block_mean_norm(audio, start, end),
            )
        )
    return out


def similarity_dissection(
    model: DissectionModel, t_row: np.ndarray, a_row: np.ndarray
) -> tuple[float, float, np.ndarray]:
    """Split one centered text-audio inner product into direct and cross parts.

    The direct part flows through matched direction pairs,
    ``sum_j t_coeff[j] * a_coeff[j] * (U[:, j] · V[:, j])``; the cross part is
    the remainder, i.e. everything carried by mismatched pairs (k != l). By
    construction ``direct + cross`` equals ``(t - t_mean) · (a - a_mean)``
    exactly.

    Returns:
        (direct, cross, per_direction_direct) where the third element is the
        length-C vector of matched-pair contributions.
    """
    t_row = np.asarray(t_row, dtype=np.float64).reshape(-1)
    a_row = np.asarray(a_row, dtype=np.float64).reshape(-1)
    if t_row.shape != (model.dim,) or a_row.shape != (model.dim,):
        raise DimensionMismatchError(
            f"rows must have width {model.dim}, got {t_row.shape} and {a_row.shape}"
        )
    t_centered = t_row - model.t_mean
    a_centered = a_row - model.a_mean
    t_hat = model.U.T @ t_centered
    a_hat = model.V.T @ a_centered
    per_direction = t_hat * a_hat * uv_alignments(model)
    direct = float(per_direction.sum())
    total = float(t_centered @ a_centered)
    return direct, total - direct, per_direction


@dataclass(frozen=True)
class ContributionReport:
    """Mean absolute similarity contributions over positive and negative pairs.

    ``direct_*`` uses all directions, ``direct_head_*`` only the first k, and
    ``cross_*`` is the mismatched-direction remainder. Positives are the
    dataset's own (text i, audio i) pairs; negatives are ordered cross-group
    pairs, either exhaustively or via a seeded uniform sample
    (``negative_sampling`` records which).
    """

    direct_pos: float
    direct_head_pos: float
    cross_pos: float
    direct_neg: float
    direct_head_neg: float
    cross_neg: float
    k: int
    n_positive: int
    n_negative: int
    negative_sampling: str


def contribution_report(
    model: DissectionModel,
    dataset: PairedDataset,
    k: int,
    *,
    seed: int = 0,
    max_exact: int = 8192,
    sample_size: int = 1_000_000,
) -> ContributionReport:
    """Mean |direct|, |direct over head|, and |cross| for positives/negatives.

    Exact negatives (every ordered cross-group pair) are used when the
    dataset has at most ``max_exact`` rows; otherwise ``sample_size`` ordered
    pairs are drawn uniformly with replacement from the cross-group set using
    ``numpy.random.default_rng(seed)``.
    """
    if not 1 <= k <= model.dim:
        raise BadKError(f"k must be in [1, {model.dim}], got {k}")
    t_hat = project(model, dataset.text).values
    a_hat = project(model, dataset.audio).values
    w = uv_alignments(model)
    tw = t_hat * w
    t_centered = dataset.text.data - model.t_mean
    a_centered = dataset.audio.data - model.a_mean
    groups = dataset.groups
    n = dataset.n

    direct_pos_i = np.einsum("ij,ij->i", tw, a_hat)
    direct_head_pos_i = np.einsum("ij,ij->i", tw[:, :k], a_hat[:, :k])
    total_pos_i = np.einsum("ij,ij->i", t_centered, a_centered)
    cross_pos_i = total_pos_i - direct_pos_i

    if n <= max_exact:
        sum_direct = sum_head = sum_cross = 0.0
        count = 0
        chunk = max(1, min(n, 8_388_608 // max(n, 1)))
        for lo in range(0, n, chunk):
            hi = min(lo + chunk, n)
            direct_blk = tw[lo:hi] @ a_hat.T
            head_blk = tw[lo:hi, :k] @ a_hat[:, :k].T
            total_blk = t_centered[lo:hi] @ a_centered.T
            mask = groups[lo:hi, None] != groups[None, :]
            sum_direct += float(np.abs(direct_blk[mask]).sum())
            sum_head += float(np.abs(head_blk[mask]).sum())
            sum_cross += float(np.abs(total_blk[mask] - direct_blk[mask]).sum())
            count += int(mask.sum())
        if count == 0:
            raise BadKError("no cross-group pairs exist (single group)")
        direct_neg = sum_direct / count
        head_neg = sum_head / count
        cross_neg = sum_cross / count
        sampling = "exact:all-ordered-cross-group-pairs"
        n_negative = count
    else:
        rng = np.random.default_rng(seed)
        rows_i = np.empty(sample_size, dtype=np.int64)
        rows_j = np.empty(sample_size, dtype=np.int64)
        filled = 0
        while filled < sample_size:
            need = sample_size - filled
            cand_i = rng.integers(0, n, size=need + need // 4 + 16)
            cand_j = rng.integers(0, n, size=cand_i.shape[0])
            ok = groups[cand_i] != groups[cand_j]
            take = min(int(ok.sum()), need)
            rows_i[filled : filled + take] = cand_i[ok][:take]
            rows_j[filled : filled + take] = cand_j[ok][:take]
            filled += take
        sum_direct = sum_head = sum_cross = 0.0
        chunk = 16384
        for lo in range(0, sample_size, chunk):
            ii = rows_i[lo : lo + chunk]
            jj = rows_j[lo : lo + chunk]
            d = np.einsum("ij,ij->i", tw[ii], a_hat[jj])
            h = np.einsum("ij,ij->i", tw[ii, :k], a_hat[jj, :k])
            t = np.einsum("ij,ij->i", t_centered[ii], a_centered[jj])
            sum_direct += float(np.abs(d).sum())
            sum_head += float(np.abs(h).sum())
            sum_cross += float(np.abs(t - d).sum())
        direct_neg = sum_direct / sample_size
        head_neg = sum_head / sample_size
        cross_neg = sum_cross / sample_size
        sampling = f"sampled:{sample_size}:seed={seed}"
        n_negative = sample_size

    return ContributionReport(
        direct_pos=float(np.abs(direct_pos_i).mean()),
        direct_head_pos=float(np.abs(direct_head_pos_i).mean()),
        cross_pos=float(np.abs(cross_pos_i).mean()),
        direct_neg=direct_neg,
        direct_head_neg=head_neg,
        cross_neg=cross_neg,
        k=k,
        n_positive=n,
        n_negative=n_negative,
        negative_sampling=sampling,
    )


def coeff_covariance(coeffs: Coefficients) -> np.ndarray:
    """Unnormalized Gram matrix of coefficient columns: ``valuesᵀ @ values``.

    Off-diagonal mass shows how far one modality's coordinates are from
    uncorrelated (within a modality they generally are correlated; only the
    cross-modal Gram diagonalizes on the fitting set).
    """
    return coeffs.values.T @ coeffs.values


def cross_coeff_covariance(text: Coefficients, audio: Coefficients) -> np.ndarray:
    """Unnormalized cross-Gram ``text_valuesᵀ @ audio_values``.

    On the fitting set this is ``diag(sigma)``: off-diagonal entries vanish.
    """
    if text.values.shape[0] != audio.values.shape[0]:
        raise DimensionMismatchError("coefficient stacks must have equal row counts")
    return text.values.T @ audio.values


def top_items_by_direction(
    model: DissectionModel,
    coeffs: Coefficients,
    texts: list[str],
    j: int,
    top_k: int = 4,
    dedup_threshold: float = 0.95,
) -> list[tuple[str, float]]:
    """Highest-coefficient captions along direction ``j``, near-dup filtered.

    Candidates are ranked by descending coefficient; a candidate is dropped
    when the cosine between its reconstructed raw embedding and any already
    kept one exceeds ``dedup_threshold``. Returns up to ``top_k``
    ``(caption, coefficient)`` pairs.

    Raises:
        MissingTextsError: no caption strings supplied.
        BadKError: ``j`` outside the coefficient block.
    """
    if texts is None:
        raise MissingTextsError("dataset has no caption strings for attribution")
    if len(texts) != coeffs.n:
        raise MissingTextsError(
            f"{len(texts)} captions for {coeffs.n} coefficient rows"
        )
    col = j - coeffs.offset
    if not 0 <= col < coeffs.width:
        raise BadKError(
            f"direction {j} outside block [{coeffs.offset}, "
            f"{coeffs.offset + coeffs.width})"
        )
    if coeffs.weighted:
        raise ValueError("attribution needs raw (unweighted) coefficients")
    values = coeffs.values[:, col]
    order = np.argsort(-values, kind="stable")
    basis = model.basis(coeffs.modality)[
        :, coeffs.offset : coeffs.offset + coeffs.width
    ]
    mean = model.mean(coeffs.modality)
    kept_rows: list[np.ndarray] = []
    result: list[tuple[str, float]] = []
    for idx in order:
        raw = mean + basis @ coeffs.values[idx]
        norm = np.linalg.norm(raw)
        unit = raw if norm == 0.0 else raw / norm
        # Cosines are clamped so a threshold of 1.0 always means "keep
        # everything", even when rounding pushes a self-similarity past 1.
        if any(min(float(unit @ prev), 1.0) > dedup_threshold for prev in kept_rows):
            continue
        kept_rows.append(unit)
        result.append((texts[int(idx)], float(values[idx])))
        if len(result) == top_k:
            break
    return result


def per_direction_table(
    model: DissectionModel, dataset: PairedDataset
) -> dict[str, np.ndarray]:
    """Column arrays for the per-direction diagnostic table.

    Keys: ``index`` (0-based), ``sigma``, ``uv``, ``sqrt_cov``, ``std_t``,
    ``std_a``, ``corr``, ``net_useful`` — one entry per direction.
    """
    decomp = covariance_decomposition(model, dataset)
    alignments = uv_alignments(model)
    return {
        "index": np.arange(model.dim),
        "sigma": model.sigma.copy(),
        "uv": alignments,
        "sqrt_cov": decomp.sqrt_cov,
        "std_t": decomp.text_std,
        "std_a": decomp.audio_std,
        "corr": decomp.corr,
        "net_useful": model.sigma * alignments,
    }
