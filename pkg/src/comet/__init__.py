"""comet: cross-modal embedding dissection toolkit.

Fits a paired-direction decomposition of two-tower contrastive embeddings
(text and audio stacks paired row-by-row), and builds on it: per-direction
diagnostics, spectral compression, training-free modality-gap mappers,
retrieval evaluation, and seeded synthetic datasets with planted structure.
"""

__version__ = "0.1.0"

from .decomposition import (
    Coefficients,
    DissectionModel,
    PcaModel,
    fit,
    fit_pca,
    l2_normalize,
    load_model,
    load_pca,
    project,
    project_pca,
    reconstruct,
    reweight_head,
    save_model,
    save_pca,
    tail,
    truncate_head,
)
from .diagnostics import (
    ContributionReport,
    CovarianceDecomposition,
    SubspaceNorms,
    coeff_covariance,
    contribution_report,
    covariance_decomposition,
    cross_coeff_covariance,
    net_useful_contribution,
    per_direction_table,
    similarity_dissection,
    spectrum,
    subspace_norms,
    top_items_by_direction,
    uv_alignments,
    uv_matrix,
)
from .errors import (
    BadKError,
    BadMassError,
    BadSpecError,
    BadTauError,
    CometError,
    DegenerateInputError,
    DimensionMismatchError,
    EmptyBankError,
    GroupError,
    MalformedHeaderError,
    MissingTextsError,
    ModalityError,
    NoPositivesError,
    NonFiniteDataError,
    PairingError,
    ShapeError,
    UnsupportedDtypeError,
    ZeroRowWarning,
)
from .io import (
    DatasetManifest,
    EmbeddingMatrix,
    Modality,
    PairedDataset,
    l2_normalize_rows,
    load_dataset,
    read_manifest,
    read_tensor,
    write_manifest,
    write_tensor,
)
from .mappers import (
    DEFAULT_NOISE_VARIANCE,
    DEFAULT_TAU,
    MemoryBank,
    PdCharacterization,
    embedding_shift,
    linear_pd,
    nnd,
    nnd_batch,
    noise_inject,
    pd_characterize,
    projection_decode,
    softmax_support,
    softmax_weights,
)
from .retrieval import (
    Direction,
    RetrievalMetrics,
    build_protocol,
    evaluate,
    evaluate_dataset,
    protocol_from_arrays,
    similarity_matrix,
)
from .synthetic import (
    PRESET_NAMES,
    SyntheticSpec,
    SyntheticTruth,
    generate,
    preset,
    train_eval_split,
)

__all__ = [name for name in dir() if not name.startswith("_")]
