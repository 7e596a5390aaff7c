"""Feature-space analytics for neural collapse: collapse metrics over
labeled embedding sets, few-shot head evaluation, and closed-form
generalization bounds with Monte Carlo verifiers."""

from .bounds import (
    BoundCheckReport,
    GaussianClassModel,
    Prop1Inputs,
    Prop2Inputs,
    ReluBoundInputs,
    lemma1_variance_bound,
    lemma2_lower_bound,
    prop1_bound,
    prop2_bound,
    prop3_eps1,
    prop3_eps2,
    prop4_rademacher_bound,
    prop5_bound_menu,
    prop5_gaussian_bound,
    prop5_general_bound,
    prop5_relaxed_bound,
    verify_lemma2_mc,
    verify_prop5_mc,
)
from .embeddings import (
    ClassPartition,
    FormatError,
    LabeledEmbeddings,
    load_embeddings,
    partition_by_class,
    save_embeddings,
)
from .fewshot import (
    AccuracyReport,
    Episode,
    EpisodeConfig,
    NcmModel,
    RidgeModel,
    evaluate,
    ncm_fit,
    ncm_predict,
    ridge_fit,
    ridge_predict,
    ridge_solve,
    sample_episode,
)
from .metrics import (
    CdnvReport,
    ClassStats,
    GeometryReport,
    ccnv,
    cdnv_matrix,
    cdnv_pair,
    class_stats,
    geometry,
    pseudo_inverse,
)
from .synth import (
    MixtureSpec,
    collapsed_set,
    gaussian_mixture,
    simplex_etf_means,
    uniform_cube_means,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyReport",
    "BoundCheckReport",
    "CdnvReport",
    "ClassPartition",
    "ClassStats",
    "Episode",
    "EpisodeConfig",
    "FormatError",
    "GaussianClassModel",
    "GeometryReport",
    "LabeledEmbeddings",
    "MixtureSpec",
    "NcmModel",
    "Prop1Inputs",
    "Prop2Inputs",
    "ReluBoundInputs",
    "RidgeModel",
    "ccnv",
    "cdnv_matrix",
    "cdnv_pair",
    "class_stats",
    "collapsed_set",
    "evaluate",
    "gaussian_mixture",
    "geometry",
    "lemma1_variance_bound",
    "lemma2_lower_bound",
    "load_embeddings",
    "ncm_fit",
    "ncm_predict",
    "partition_by_class",
    "prop1_bound",
    "prop2_bound",
    "prop3_eps1",
    "prop3_eps2",
    "prop4_rademacher_bound",
    "prop5_bound_menu",
    "prop5_gaussian_bound",
    "prop5_general_bound",
    "prop5_relaxed_bound",
    "pseudo_inverse",
    "ridge_fit",
    "ridge_predict",
    "ridge_solve",
    "sample_episode",
    "save_embeddings",
    "simplex_etf_means",
    "uniform_cube_means",
    "verify_lemma2_mc",
    "verify_prop5_mc",
]
