"""Mutual-information scoring for paired embeddings.

Fit Gaussian reference moments over matched feature pairs, score candidate
pairs by pointwise mutual information, and compare against the usual cosine
and moment baselines. See the README for the CLI walkthrough.
"""

from .baselines import (
    BaselineConfig,
    ReferenceSetR,
    clip_s,
    fid,
    info_nce_score,
    r_precision,
    ref_clip_s,
    ref_mid,
)
from .errors import DataError, MidmetricError, NumericError, UsageError
from .evalstats import (
    JudgmentTable,
    PairCounts,
    PairPreference,
    foil_accuracy,
    kendall_tau_b,
    kendall_tau_c,
    lowest_of_three_accuracy,
    pair_counts,
    pairwise_accuracy,
    read_judgments,
)
from .gaussmi import (
    DEFAULT_EPSILON,
    EPSILON_PRESETS,
    GaussianJointModel,
    PairBatch,
    ScoreReport,
    SmdDecomposition,
    fit_reference,
    kl_gaussian,
    mid,
    mid_via_kl,
    mutual_information,
    pmi,
    smd_expectation_decomposition,
)
from .harness import (
    CurvePoint,
    SyntheticSpec,
    foil_fixture,
    gen_synthetic,
    parsimony_curve,
    shuffle_curve,
)
from .matstat import (
    RegularizedGaussian,
    SymEig,
    covariance,
    inverse_reg,
    logdet_reg,
    mahalanobis_sq,
    mean,
    sym_eig,
)
from .store import (
    EmbeddingSet,
    Manifest,
    load_model,
    read_embeddings,
    read_manifest,
    save_model,
    write_embeddings,
    write_manifest,
)

__version__ = "1.0.0"

__all__ = [
    "BaselineConfig",
    "CurvePoint",
    "DEFAULT_EPSILON",
    "DataError",
    "EPSILON_PRESETS",
    "EmbeddingSet",
    "GaussianJointModel",
    "JudgmentTable",
    "Manifest",
    "MidmetricError",
    "NumericError",
    "PairBatch",
    "PairCounts",
    "PairPreference",
    "ReferenceSetR",
    "RegularizedGaussian",
    "ScoreReport",
    "SmdDecomposition",
    "SymEig",
    "SyntheticSpec",
    "UsageError",
    "clip_s",
    "covariance",
    "fid",
    "fit_reference",
    "foil_accuracy",
    "foil_fixture",
    "gen_synthetic",
    "info_nce_score",
    "inverse_reg",
    "kendall_tau_b",
    "kendall_tau_c",
    "kl_gaussian",
    "load_model",
    "logdet_reg",
    "lowest_of_three_accuracy",
    "mahalanobis_sq",
    "mean",
    "mid",
    "mid_via_kl",
    "mutual_information",
    "pair_counts",
    "pairwise_accuracy",
    "parsimony_curve",
    "pmi",
    "r_precision",
    "read_embeddings",
    "read_judgments",
    "read_manifest",
    "ref_clip_s",
    "ref_mid",
    "save_model",
    "shuffle_curve",
    "smd_expectation_decomposition",
    "sym_eig",
    "write_embeddings",
    "write_manifest",
]
