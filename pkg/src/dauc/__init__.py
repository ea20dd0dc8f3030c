"""Density-aware uncertainty categorization for classifiers.

Given a classifier that factors into feature extractor, linear map and
softmax, this package estimates kernel densities in the latent space to sort
uncertain predictions into out-of-distribution (OOD), decision-boundary
(Bnd), in-distribution-misclassification (IDM), B&I and Other classes, and
supports the inverse move: retraining on the training rows that most resemble
a flagged subset.
"""

from .categorize import (
    Category,
    CategoryReport,
    ConfusionDensityIndex,
    ScoreTable,
    build_index,
    categorize,
    kernel_robustness,
    quantile_threshold,
    score,
    set_thresholds,
)
from .classifier import (
    LinearSoftmaxModel,
    MlpModel,
    TrainConfig,
    entropy_uncertainty,
    lipschitz_check,
    predict,
    softmax,
    train_linear,
    train_mlp,
)
from .data import (
    OOD_LABEL,
    ClassPair,
    DataError,
    LabeledFeatures,
    LatentDataset,
    NormalizationStats,
    ParseError,
    load_features_csv,
    load_latent_csv,
    save_features_csv,
    save_latent_csv,
    zscore_apply,
    zscore_fit,
)
from .evaluate import pr_curve, prf
from .inverse import FilterConfig, filter_train, inverse_retrain
from .kde import (
    KERNELS,
    KdeModel,
    KernelKind,
    active_backend,
    kde_eval,
    kde_eval_batch,
    kde_fit,
    kernel_eval,
    set_backend,
)
from .synth import (
    IdmClustersConfig,
    TwoSmilesConfig,
    make_idm_clusters,
    make_two_moons,
    make_two_smiles,
)

__version__ = "0.1.0"
