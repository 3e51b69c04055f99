"""Paired-direction decomposition of two-modality embedding stacks.

The central object is a :class:`DissectionModel`: means of both modalities
plus paired orthonormal direction bases (U for text, V for audio) and a
shared non-negative spectrum, obtained from the SVD of the cross-covariance
of the mean-centered stacks. Every embedding then splits exactly into
``mean + sum_j coeff_j * direction_j``, which is what the compression,
diagnostic, and gap-mapping layers build on.

A plain single-modality PCA model is provided alongside, as the natural
unpaired baseline for the same compression interface.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .errors import (
    BadKError,
    DegenerateInputError,
    DimensionMismatchError,
    MalformedHeaderError,
    ModalityError,
    ZeroRowWarning,
)
from .io import (
    EmbeddingMatrix,
    Modality,
    PairedDataset,
    _atomic_npy_write,
    atomic_write_json,
)

# Head size of the published reference configuration.
DEFAULT_HEAD_K = 100


@dataclass(frozen=True)
class Coefficients:
    """Direction-basis coordinates of a stack of embeddings.

    ``values[i, j]`` is the coordinate of item i along direction
    ``offset + j`` of the model's basis for ``modality``. ``offset`` is zero
    for head/full coefficient blocks and positive for tail blocks.
    ``weighted`` marks audio coefficients that have been rescaled by the
    per-direction basis alignments (no longer raw coordinates).
    """

    values: np.ndarray
    modality: Modality
    offset: int = 0
    weighted: bool = False

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, order="C", copy=True)
        if values.ndim != 2:
            raise BadKError(f"coefficients must be 2-D, got {values.ndim}-D")
        if self.offset < 0:
            raise BadKError(f"offset must be >= 0, got {self.offset}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        """Number of rows (items)."""
        return self.values.shape[0]

    @property
    def width(self) -> int:
        """Number of retained directions."""
        return self.values.shape[1]


@dataclass(frozen=True)
class DissectionModel:
    """Fitted paired-direction model.

    Attributes:
        t_mean: (C,) mean of the text training stack.
        a_mean: (C,) mean of the audio training stack.
        U: (C, C) orthonormal text directions, one per column.
        V: (C, C) orthonormal audio directions, paired with U's columns.
        sigma: (C,) non-increasing, non-negative shared spectrum
            (unnormalized: divide by ``n_train`` for per-sample covariance).
        n_train: number of training pairs.
        source_manifest: provenance string for the training dataset.
    """

    t_mean: np.ndarray
    a_mean: np.ndarray
    U: np.ndarray
    V: np.ndarray
    sigma: np.ndarray
    n_train: int
    source_manifest: str = ""

    def __post_init__(self) -> None:
        for name in ("t_mean", "a_mean", "U", "V", "sigma"):
            arr = np.array(getattr(self, name), dtype=np.float64, order="C", copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        c = self.U.shape[0]
        if self.U.shape != (c, c) or self.V.shape != (c, c):
            raise DimensionMismatchError(
                f"direction bases must be square and equal-sized, "
                f"got U{self.U.shape} V{self.V.shape}"
            )
        if self.t_mean.shape != (c,) or self.a_mean.shape != (c,):
            raise DimensionMismatchError("means must be (C,) vectors matching the bases")
        if self.sigma.shape != (c,):
            raise DimensionMismatchError("spectrum must have one value per direction")

    @property
    def dim(self) -> int:
        """Embedding width C."""
        return self.U.shape[0]

    def mean(self, modality: Modality) -> np.ndarray:
        """Training mean of the given modality."""
        return self.t_mean if modality is Modality.TEXT else self.a_mean

    def basis(self, modality: Modality) -> np.ndarray:
        """Direction basis of the given modality (columns are directions)."""
        return self.U if modality is Modality.TEXT else self.V


def _canonical_signs(U: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Flip paired columns so each U column's largest-|entry| is positive."""
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, V * signs


def fit(train: PairedDataset) -> DissectionModel:
    """Fit the paired-direction model on a training set.

    Centers both stacks on their own means, forms the (C, C) cross-covariance
    ``centered_textᵀ @ centered_audio``, and takes its full SVD. Paired
    columns are sign-canonicalized (largest-|entry| of each text direction is
    positive, flipping text and audio directions together so products are
    unchanged).

    The linear algebra runs single-threaded for run-to-run determinism.

    Raises:
        DegenerateInputError: fewer than 2 training pairs.
    """
    if train.n < 2:
        raise DegenerateInputError(f"need at least 2 pairs to fit, got {train.n}")
    t_mean = train.text.data.mean(axis=0)
    a_mean = train.audio.data.mean(axis=0)
    T = train.text.data - t_mean
    A = train.audio.data - a_mean
    with threadpool_limits(limits=1):
        M = T.T @ A
        U, sigma, Vt = np.linalg.svd(M)
    U, V = _canonical_signs(U, Vt.T)
    return DissectionModel(
        t_mean=t_mean,
        a_mean=a_mean,
        U=U,
        V=V,
        sigma=sigma,
        n_train=train.n,
        source_manifest=train.name,
    )


def project(model: DissectionModel, matrix: EmbeddingMatrix) -> Coefficients:
    """Full-width coordinates of ``matrix`` in its modality's basis.

    Subtracts the model's training mean for the matrix's modality and
    projects onto that modality's directions. Exact inverse of
    :func:`reconstruct` with all directions kept.
    """
    if matrix.dim != model.dim:
        raise DimensionMismatchError(
            f"embedding width {matrix.dim} != model width {model.dim}"
        )
    centered = matrix.data - model.mean(matrix.modality)
    values = centered @ model.basis(matrix.modality)
    return Coefficients(values, matrix.modality, offset=0, weighted=False)


def reconstruct(
    model: DissectionModel, coeffs: Coefficients, keep: int | None = None
) -> EmbeddingMatrix:
    """Map coefficients back to embedding space: ``mean + values @ basisᵀ``.

    Args:
        keep: if given, zero all coordinates from index ``keep`` on before
            reconstructing (``keep=0`` reproduces the mean for every row).

    Raises:
        ValueError: coefficients are offset or alignment-weighted (no longer
            raw coordinates, so reconstruction would be meaningless).
        BadKError: ``keep`` outside ``[0, width]``.
        DimensionMismatchError: more coefficients than model directions.
    """
    if coeffs.offset != 0 or coeffs.weighted:
        raise ValueError(
            "reconstruct needs raw head coefficients (offset=0, unweighted)"
        )
    width = coeffs.width
    if width > model.dim:
        raise DimensionMismatchError(
            f"{width} coefficients for a model with {model.dim} directions"
        )
    values = coeffs.values
    if keep is not None:
        if not 0 <= keep <= width:
            raise BadKError(f"keep must be in [0, {width}], got {keep}")
        zeroed = values.copy()
        zeroed[:, keep:] = 0.0
        values = zeroed
    basis = model.basis(coeffs.modality)[:, :width]
    data = values @ basis.T + model.mean(coeffs.modality)
    return EmbeddingMatrix(data, coeffs.modality)


def truncate_head(coeffs: Coefficients, k: int) -> Coefficients:
    """Keep the first ``k`` coefficient columns (the spectral head).

    Raises:
        ValueError: coefficients do not start at direction 0.
        BadKError: ``k`` outside ``[1, width]``.
    """
    if coeffs.offset != 0:
        raise ValueError("truncate_head needs coefficients starting at direction 0")
    if not 1 <= k <= coeffs.width:
        raise BadKError(f"k must be in [1, {coeffs.width}], got {k}")
    return Coefficients(
        coeffs.values[:, :k], coeffs.modality, offset=0, weighted=coeffs.weighted
    )


def tail(coeffs: Coefficients, k: int) -> Coefficients:
    """Drop the first ``k`` coefficient columns (keep the spectral tail).

    The result's ``offset`` records where its columns sit in the full basis.
    ``k=0`` returns the input unchanged; ``k = width - 1`` keeps one column.

    Raises:
        ValueError: coefficients do not start at direction 0.
        BadKError: ``k`` outside ``[0, width)``.
    """
    if coeffs.offset != 0:
        raise ValueError("tail needs coefficients starting at direction 0")
    if not 0 <= k < coeffs.width:
        raise BadKError(f"k must be in [0, {coeffs.width}), got {k}")
    return Coefficients(
        coeffs.values[:, k:], coeffs.modality, offset=k, weighted=coeffs.weighted
    )


def reweight_head(model: DissectionModel, audio_head: Coefficients) -> Coefficients:
    """Scale audio coefficients by the per-direction basis alignments.

    Coordinate j is multiplied by ``U[:, j] · V[:, j]``, damping directions
    whose text and audio axes disagree. Only audio coefficients may be
    reweighted (text coordinates are the reference frame).

    Raises:
        ModalityError: called on text coefficients.
        ValueError: coefficients are offset or already weighted.
        DimensionMismatchError: more coefficients than model directions.
    """
    if audio_head.modality is not Modality.AUDIO:
        raise ModalityError("only audio coefficients can be alignment-reweighted")
    if audio_head.offset != 0 or audio_head.weighted:
        raise ValueError("reweight_head needs raw head coefficients")
    width = audio_head.width
    if width > model.dim:
        raise DimensionMismatchError(
            f"{width} coefficients for a model with {model.dim} directions"
        )
    weights = np.einsum("ij,ij->j", model.U[:, :width], model.V[:, :width])
    return Coefficients(
        audio_head.values * weights, Modality.AUDIO, offset=0, weighted=True
    )


def l2_normalize(x: EmbeddingMatrix | Coefficients):
    """Scale each row of an embedding or coefficient stack to unit norm.

    Zero rows are left unchanged with a :class:`ZeroRowWarning`. Returns the
    same type as the input with all other fields preserved.
    """
    arr = x.data if isinstance(x, EmbeddingMatrix) else x.values
    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    zero = norms == 0.0
    if np.any(zero):
        warnings.warn(
            f"{int(zero.sum())} zero-norm row(s) left unnormalized",
            ZeroRowWarning,
            stacklevel=2,
        )
    out = arr / np.where(zero, 1.0, norms)
    if isinstance(x, EmbeddingMatrix):
        return EmbeddingMatrix(out, x.modality)
    return replace(x, values=out)


# ---------------------------------------------------------------------------
# Single-modality PCA baseline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PcaModel:
    """Single-modality PCA: mean, covariance eigenvectors, eigen-variances.

    ``directions`` columns are unit eigenvectors of the biased covariance
    ``Xᵀ X / n`` of the centered stack, in non-increasing ``variances`` order
    (zero-padded past the data rank).
    """

    mean: np.ndarray
    directions: np.ndarray
    variances: np.ndarray
    modality: Modality
    n_train: int

    def __post_init__(self) -> None:
        for name in ("mean", "directions", "variances"):
            arr = np.array(getattr(self, name), dtype=np.float64, order="C", copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        c = self.directions.shape[0]
        if self.directions.shape != (c, c):
            raise DimensionMismatchError("PCA directions must form a square basis")
        if self.mean.shape != (c,) or self.variances.shape != (c,):
            raise DimensionMismatchError("PCA mean/variances must match the basis width")

    @property
    def dim(self) -> int:
        """Embedding width C."""
        return self.directions.shape[0]


def fit_pca(matrix: EmbeddingMatrix) -> PcaModel:
    """Fit single-modality PCA via the eigendecomposition of ``Xᵀ X / n``.

    Column signs are canonicalized the same way as the paired model (largest
    |entry| of each direction positive). Negative eigenvalues from rounding
    are clipped to zero.

    Raises:
        DegenerateInputError: fewer than 2 rows.
    """
    if matrix.n < 2:
        raise DegenerateInputError(f"need at least 2 rows for PCA, got {matrix.n}")
    mean = matrix.data.mean(axis=0)
    X = matrix.data - mean
    with threadpool_limits(limits=1):
        S = (X.T @ X) / matrix.n
        evals, evecs = np.linalg.eigh(S)
    order = np.argsort(evals)[::-1]
    variances = np.clip(evals[order], 0.0, None)
    directions = evecs[:, order]
    idx = np.argmax(np.abs(directions), axis=0)
    signs = np.sign(directions[idx, np.arange(directions.shape[1])])
    signs[signs == 0] = 1.0
    return PcaModel(
        mean=mean,
        directions=directions * signs,
        variances=variances,
        modality=matrix.modality,
        n_train=matrix.n,
    )


def project_pca(pca: PcaModel, matrix: EmbeddingMatrix, k: int) -> Coefficients:
    """First-``k`` PCA coordinates of ``matrix`` (centered on the PCA mean).

    Raises:
        DimensionMismatchError: width mismatch.
        BadKError: ``k`` outside ``[1, C]``.
    """
    if matrix.dim != pca.dim:
        raise DimensionMismatchError(
            f"embedding width {matrix.dim} != PCA width {pca.dim}"
        )
    if not 1 <= k <= pca.dim:
        raise BadKError(f"k must be in [1, {pca.dim}], got {k}")
    values = (matrix.data - pca.mean) @ pca.directions[:, :k]
    return Coefficients(values, matrix.modality, offset=0, weighted=False)


# ---------------------------------------------------------------------------
# Model persistence (directory of NPY tensors + one JSON descriptor)
# ---------------------------------------------------------------------------

_MODEL_FILES = ("t_mean", "a_mean", "U", "V", "sigma")


def save_model(model: DissectionModel, directory: str | os.PathLike) -> None:
    """Persist a model as a directory of NPY v1.0 files plus ``model.json``.

    Output is deterministic: no timestamps, fixed key order, float64 tensors.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in _MODEL_FILES:
        _atomic_npy_write(directory / f"{name}.npy", getattr(model, name))
    atomic_write_json(
        directory / "model.json",
        {
            "dim": model.dim,
            "n_train": model.n_train,
            "source_manifest": model.source_manifest,
            "tool_version": __version__,
        },
    )


def load_model(directory: str | os.PathLike) -> DissectionModel:
    """Load a model saved by :func:`save_model`.

    Raises:
        MalformedHeaderError: missing or unparsable ``model.json``.
        DimensionMismatchError: tensor shapes that do not form a valid model.
    """
    directory = Path(directory)
    meta_path = directory / "model.json"
    try:
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        raise MalformedHeaderError(f"{directory}: no model.json found") from None
    except json.JSONDecodeError as exc:
        raise MalformedHeaderError(f"{meta_path}: invalid JSON: {exc}") from exc
    arrays = {name: np.load(directory / f"{name}.npy") for name in _MODEL_FILES}
    return DissectionModel(
        t_mean=arrays["t_mean"],
        a_mean=arrays["a_mean"],
        U=arrays["U"],
        V=arrays["V"],
        sigma=arrays["sigma"],
        n_train=int(meta["n_train"]),
        source_manifest=str(meta.get("source_manifest", "")),
    )


def save_pca(pca: PcaModel, directory: str | os.PathLike) -> None:
    """Persist a PCA model as NPY files plus ``pca.json`` (deterministic)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in ("mean", "directions", "variances"):
        _atomic_npy_write(directory / f"{name}.npy", getattr(pca, name))
    atomic_write_json(
        directory / "pca.json",
        {
            "dim": pca.dim,
            "n_train": pca.n_train,
            "modality": pca.modality.value,
            "tool_version": __version__,
        },
    )


def load_pca(directory: str | os.PathLike) -> PcaModel:
    """Load a PCA model saved by :func:`save_pca`."""
    directory = Path(directory)
    meta_path = directory / "pca.json"
    try:
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        raise MalformedHeaderError(f"{directory}: no pca.json found") from None
    except json.JSONDecodeError as exc:
        raise MalformedHeaderError(f"{meta_path}: invalid JSON: {exc}") from exc
    return PcaModel(
        mean=np.load(directory / "mean.npy"),
        directions=np.load(directory / "directions.npy"),
        variances=np.load(directory / "variances.npy"),
        modality=Modality(meta["modality"]),
        n_train=int(meta["n_train"]),
    )
