"""Training-free audio-to-text mappers for the contrastive modality gap.

Audio and text embeddings from a two-tower contrastive encoder live on the
same sphere but in displaced regions. The mappers here move an audio
embedding toward the text region without any learned parameters: shifting by
the mean difference, perturbing with noise, snapping to the nearest memory
text, or softly projecting onto the convex hull of a text memory bank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decomposition import DissectionModel
from .errors import (
    BadKError,
    BadMassError,
    BadTauError,
    DimensionMismatchError,
    EmptyBankError,
    NonFiniteDataError,
    ShapeError,
)
from .io import EmbeddingMatrix, l2_normalize_rows

DEFAULT_TAU = 0.01
DEFAULT_NOISE_VARIANCE = 0.013


@dataclass(frozen=True)
class MemoryBank:
    """Unit-normalized text embeddings used as a decoding support set.

    Attributes:
        rows: (N_mem, C) float64, every row unit Euclidean norm.
        source: provenance string (e.g. the tensor file the rows came from).
    """

    rows: np.ndarray
    source: str = ""

    def __post_init__(self) -> None:
        rows = np.array(self.rows, dtype=np.float64, order="C", copy=True)
        if rows.ndim != 2:
            raise ShapeError(f"memory bank must be 2-D, got {rows.ndim}-D")
        if rows.shape[0] == 0:
            raise EmptyBankError("memory bank has no rows")
        if not np.all(np.isfinite(rows)):
            raise NonFiniteDataError("memory bank contains NaN or Inf")
        norms = np.linalg.norm(rows, axis=1)
        if np.any(norms == 0.0):
            raise ShapeError("memory bank contains a zero row; cannot normalize")
        rows /= norms[:, None]
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_matrix(cls, matrix: EmbeddingMatrix, source: str = "") -> "MemoryBank":
        """Build a bank from an embedding stack (rows are normalized here)."""
        return cls(matrix.data, source=source)

    @property
    def n(self) -> int:
        """Number of memory rows."""
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        """Embedding width."""
        return self.rows.shape[1]


def embedding_shift(
    t_mean: np.ndarray, a_mean: np.ndarray, batch: EmbeddingMatrix
) -> EmbeddingMatrix:
    """Subtract the mean modality offset, then renormalize rows to the sphere.

    Each row becomes ``normalize(row - (a_mean - t_mean))``: the audio cloud's
    centroid is moved onto the text centroid, first-order closing the gap.
    """
    t_mean = np.asarray(t_mean, dtype=np.float64).reshape(-1)
    a_mean = np.asarray(a_mean, dtype=np.float64).reshape(-1)
    if t_mean.shape != a_mean.shape or t_mean.shape[0] != batch.dim:
        raise DimensionMismatchError(
            f"means of width {t_mean.shape[0]}/{a_mean.shape[0]} "
            f"do not match batch width {batch.dim}"
        )
    shifted = batch.data - (a_mean - t_mean)
    return EmbeddingMatrix(l2_normalize_rows(shifted), batch.modality)


def noise_inject(
    batch: EmbeddingMatrix,
    variance: float = DEFAULT_NOISE_VARIANCE,
    seed: int = 0,
) -> EmbeddingMatrix:
    """Add seeded isotropic Gaussian noise per coordinate, then renormalize.

    ``variance`` is the per-coordinate noise variance; ``variance=0`` is the
    identity up to renormalization. Deterministic for a fixed seed.
    """
    if variance < 0:
        raise ValueError(f"noise variance must be >= 0, got {variance}")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, np.sqrt(variance), size=batch.data.shape)
    return EmbeddingMatrix(l2_normalize_rows(batch.data + noise), batch.modality)


def nnd(bank: MemoryBank, query: np.ndarray) -> tuple[np.ndarray, int]:
    """Nearest-neighbor decode: the bank row with the largest inner product.

    Ties break toward the lowest row index. The query is used as given
    (inner-product ranking is scale-invariant in the query).

    Returns:
        (bank row copy, row index).
    """
    query = np.asarray(query, dtype=np.float64).reshape(-1)
    if query.shape[0] != bank.dim:
        raise DimensionMismatchError(
            f"query width {query.shape[0]} != bank width {bank.dim}"
        )
    idx = int(np.argmax(bank.rows @ query))
    return bank.rows[idx].copy(), idx


def nnd_batch(bank: MemoryBank, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise :func:`nnd` over a (Q, C) query stack.

    Returns:
        (decoded rows (Q, C), indices (Q,)).
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if queries.shape[1] != bank.dim:
        raise DimensionMismatchError(
            f"query width {queries.shape[1]} != bank width {bank.dim}"
        )
    indices = np.argmax(queries @ bank.rows.T, axis=1)
    return bank.rows[indices].copy(), indices


def softmax_weights(bank: MemoryBank, queries: np.ndarray, tau: float) -> np.ndarray:
    """Temperature-softmax attention of each query over the bank rows.

    ``w[q, m] = softmax_m((bank[m] · query[q]) / tau)`` computed with the
    max-subtraction trick, so the largest logit never under- or overflows.

    Raises:
        BadTauError: non-positive temperature, or weights that still degenerate
            (non-finite after stabilization).
    """
    if not tau > 0:
        raise BadTauError(f"temperature must be > 0, got {tau}")
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if queries.shape[1] != bank.dim:
        raise DimensionMismatchError(
            f"query width {queries.shape[1]} != bank width {bank.dim}"
        )
    logits = (queries @ bank.rows.T) / tau
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    sums = weights.sum(axis=1, keepdims=True)
    if not np.all(np.isfinite(sums)) or np.any(sums == 0.0):
        raise BadTauError(f"softmax degenerated at tau={tau}")
    return weights / sums


def projection_decode(
    bank: MemoryBank, query: np.ndarray, tau: float = DEFAULT_TAU
) -> np.ndarray:
    """Soft projection onto the bank: attention-weighted mean, renormalized.

    Each output row is ``normalize(sum_m w[m] * bank[m])`` with softmax
    weights at temperature ``tau``. As ``tau -> 0`` this approaches the
    nearest bank row; as ``tau -> inf`` it approaches the normalized bank
    mean. Accepts a single (C,) query or a (Q, C) stack and matches the input
    shape.
    """
    query = np.asarray(query, dtype=np.float64)
    single = query.ndim == 1
    weights = softmax_weights(bank, query, tau)
    mixed = weights @ bank.rows
    out = l2_normalize_rows(mixed)
    return out[0] if single else out


def linear_pd(
    model: DissectionModel, bank_centered: np.ndarray, query_centered: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Linearized projection decode, in raw and factored forms.

    With centered bank rows X (N_mem, C) and a centered query a, the raw form
    is ``Xᵀ (X a)``. The factored form routes through the fitted bases:
    ``U (X_hatᵀ X_hat) (Uᵀ V) a_hat`` with ``X_hat = X U`` and
    ``a_hat = Vᵀ a``. The two are equal because the bases are orthonormal;
    both are returned so callers can check that identity.

    Returns:
        (raw, factored), each of shape (C,).
    """
    X = np.asarray(bank_centered, dtype=np.float64)
    a = np.asarray(query_centered, dtype=np.float64).reshape(-1)
    if X.ndim != 2:
        raise ShapeError(f"bank must be 2-D, got {X.ndim}-D")
    if X.shape[0] == 0:
        raise EmptyBankError("centered bank has no rows")
    if X.shape[1] != model.dim or a.shape[0] != model.dim:
        raise DimensionMismatchError(
            f"bank width {X.shape[1]} / query width {a.shape[0]} "
            f"!= model width {model.dim}"
        )
    direct = X.T @ (X @ a)
    X_hat = X @ model.U
    a_hat = model.V.T @ a
    G = model.U.T @ model.V
    factored = model.U @ (X_hat.T @ (X_hat @ (G @ a_hat)))
    return direct, factored


def softmax_support(
    bank: MemoryBank, query: np.ndarray, tau: float, mass: float
) -> int:
    """Smallest number of top-weighted bank rows reaching ``mass`` total weight.

    Weights are sorted descending and accumulated until the running sum
    reaches ``mass`` (within one part in 1e12, to absorb summation rounding).
    Small support means the soft projection is nearly a nearest-neighbor
    snap; support near the bank size means it is nearly the bank mean.

    Raises:
        BadMassError: ``mass`` outside (0, 1).
    """
    if not 0.0 < mass < 1.0:
        raise BadMassError(f"mass must be in (0, 1), got {mass}")
    weights = softmax_weights(bank, np.asarray(query, dtype=np.float64), tau)[0]
    ordered = np.sort(weights)[::-1]
    cumulative = np.cumsum(ordered)
    reached = np.flatnonzero(cumulative >= mass * (1.0 - 1e-12))
    return int(reached[0]) + 1 if reached.size else int(ordered.size)


@dataclass(frozen=True)
class PdCharacterization:
    """How projection decoding reshapes an audio evaluation set.

    Mean-level fields compare the evaluation audio centroid with the model's
    text training mean before and after decoding. Instance-level fields
    compare each decoded output's text-basis coordinates against the
    corresponding raw audio coordinates in the audio basis, split at
    direction ``k`` into head and tail blocks (cosines averaged over
    instances; rows whose block norm vanishes count in ``n_degenerate_head``
    and contribute 0).
    """

    cos_mean_before: float
    cos_mean_after: float
    dist_mean_before: float
    dist_mean_after: float
    head_cos_mean: float
    tail_cos_mean: float
    head_cos_mean_nnd: float
    k: int
    tau: float
    n_eval: int
    n_degenerate_head: int


_DEGENERATE_NORM_TOL = 1e-12


def _mean_block_cosine(
    A: np.ndarray, B: np.ndarray
) -> tuple[float, int]:
    """Mean row-wise cosine between two equally-shaped blocks.

    Rows where either side has (near-)zero norm — at or below roundoff
    residue — contribute 0 and are counted as degenerate.
    """
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    dot = np.einsum("ij,ij->i", A, B)
    bad = (na <= _DEGENERATE_NORM_TOL) | (nb <= _DEGENERATE_NORM_TOL)
    denom = np.where(bad, 1.0, na * nb)
    cosines = np.where(bad, 0.0, dot / denom)
    return float(cosines.mean()), int(bad.sum())


def _cosine(x: np.ndarray, y: np.ndarray) -> float:
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    if nx == 0.0 or ny == 0.0:
        return 0.0
    return float(x @ y) / (nx * ny)


def pd_characterize(
    model: DissectionModel,
    eval_audio: EmbeddingMatrix | np.ndarray,
    bank: MemoryBank,
    tau: float = DEFAULT_TAU,
    k: int = 100,
) -> PdCharacterization:
    """Measure how projection decoding moves audio toward the text region.

    The evaluation stack is row-normalized, decoded against ``bank`` at
    temperature ``tau``, and compared with the model's text mean (cosine and
    Euclidean distance of centroids, before vs after). Decoded outputs are
    then read in the text basis and raw audio in the audio basis; head
    (first ``k``) and tail cosines quantify where the decoded signal agrees
    with the original. The same head cosine under nearest-neighbor decoding
    is reported for contrast.
    """
    if not 1 <= k <= model.dim:
        raise BadKError(f"k must be in [1, {model.dim}], got {k}")
    if isinstance(eval_audio, EmbeddingMatrix):
        eval_rows = eval_audio.data
    else:
        eval_rows = np.atleast_2d(np.asarray(eval_audio, dtype=np.float64))
    if eval_rows.shape[1] != model.dim or bank.dim != model.dim:
        raise DimensionMismatchError(
            f"eval width {eval_rows.shape[1]} / bank width {bank.dim} "
            f"!= model width {model.dim}"
        )
    queries = l2_normalize_rows(eval_rows)
    decoded = projection_decode(bank, queries, tau)
    decoded_nnd, _ = nnd_batch(bank, queries)

    audio_centroid = queries.mean(axis=0)
    decoded_centroid = decoded.mean(axis=0)
    cos_before = _cosine(audio_centroid, model.t_mean)
    cos_after = _cosine(decoded_centroid, model.t_mean)
    dist_before = float(np.linalg.norm(audio_centroid - model.t_mean))
    dist_after = float(np.linalg.norm(decoded_centroid - model.t_mean))

    t_hat_pd = (decoded - model.t_mean) @ model.U
    t_hat_nnd = (decoded_nnd - model.t_mean) @ model.U
    a_hat = (queries - model.a_mean) @ model.V
    head_cos, degenerate = _mean_block_cosine(t_hat_pd[:, :k], a_hat[:, :k])
    tail_cos, _ = _mean_block_cosine(t_hat_pd[:, k:], a_hat[:, k:])
    head_cos_nnd, _ = _mean_block_cosine(t_hat_nnd[:, :k], a_hat[:, :k])

    return PdCharacterization(
        cos_mean_before=cos_before,
        cos_mean_after=cos_after,
        dist_mean_before=dist_before,
        dist_mean_after=dist_after,
        head_cos_mean=head_cos,
        tail_cos_mean=tail_cos,
        head_cos_mean_nnd=head_cos_nnd,
        k=k,
        tau=tau,
        n_eval=queries.shape[0],
        n_degenerate_head=degenerate,
    )
