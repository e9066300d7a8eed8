"""Open-set support for embedding classifiers.

Turns per-layer embeddings of a closed-set classifier into per-layer
Mahalanobis scores, feeds them to a KNN rejection scorer with a calibrated
threshold, and decides per utterance between the argmax known class and a
reject class. Ships the evaluation metrics (AUROC, AUPR, EER, closed-set
macro PRF), distance/confidence reference detectors, binary interchange
formats, a synthetic data generator, a CLI, and an HTTP service wrapper.
"""

from .baselines import (
    MdModel,
    fit_md,
    max_softmax_score,
    md_score,
    rmd_score,
)
from .detector import KnnModel, calibrate_threshold, fit_knn, knn_score
from .featurizer import LayerStatsModel, featurize, fit_layer_stats, tanh_transform
from .joint import JointPrediction, decide, decide_batch
from .linalg import GaussianFit, cholesky_spd, maha_sq, sample_cov, sample_mean
from .metrics import EvalReport, aupr, auroc, closed_set_prf, eer, evaluate
from .pipeline import compare_methods, evaluate_artifact, fit_model, rejection_scores
from .synth import SynthConfig, generate
from .tensorio import (
    EmbeddingSet,
    ModelArtifact,
    load_model,
    read_embeddings,
    save_model,
    write_embeddings,
)

__version__ = "0.1.0"

__all__ = [
    "EmbeddingSet",
    "EvalReport",
    "GaussianFit",
    "JointPrediction",
    "KnnModel",
    "LayerStatsModel",
    "MdModel",
    "ModelArtifact",
    "SynthConfig",
    "aupr",
    "auroc",
    "calibrate_threshold",
    "cholesky_spd",
    "closed_set_prf",
    "compare_methods",
    "decide",
    "decide_batch",
    "eer",
    "evaluate",
    "evaluate_artifact",
    "featurize",
    "fit_knn",
    "fit_layer_stats",
    "fit_md",
    "fit_model",
    "generate",
    "knn_score",
    "load_model",
    "maha_sq",
    "max_softmax_score",
    "md_score",
    "read_embeddings",
    "rejection_scores",
    "rmd_score",
    "sample_cov",
    "sample_mean",
    "save_model",
    "tanh_transform",
    "write_embeddings",
]
