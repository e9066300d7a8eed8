"""End-to-end operations shared by the CLI and the HTTP service.

Each function takes and returns in-memory objects; file handling stays in
the callers. This is the single composition point for
featurize -> knn -> decide and for the method comparison harness.
"""

from __future__ import annotations

import numpy as np

from .baselines import (
    fit_md,
    max_softmax_score_batch,
    md_score_batch,
    rmd_score_batch,
)
from .detector import (
    DEFAULT_CONTAMINATION,
    DEFAULT_K_NEIGHBORS,
    fit_knn,
    knn_score_batch,
)
from .errors import MissingLabels, MissingLogits
from .featurizer import featurize, fit_layer_stats
from .linalg import DEFAULT_RIDGE0
from .metrics import EvalReport, aupr, auroc, eer, evaluate
from .tensorio import EmbeddingSet, FitMeta, ModelArtifact


def fit_model(
    train: EmbeddingSet,
    *,
    k_neighbors: int = DEFAULT_K_NEIGHBORS,
    contamination: float = DEFAULT_CONTAMINATION,
    tanh: bool = True,
    calibrate_w: bool = True,
    ridge0: float = DEFAULT_RIDGE0,
) -> ModelArtifact:
    """Fit per-layer statistics and the KNN rejection model on one set."""
    stats = fit_layer_stats(train, tanh=tanh, calibrate_w=calibrate_w, ridge0=ridge0)
    features = featurize(stats, train)
    knn = fit_knn(features, k_neighbors=k_neighbors, contamination=contamination)
    meta = FitMeta(
        k_neighbors=k_neighbors,
        contamination=contamination,
        ridge0=ridge0,
        tanh=tanh,
    )
    return ModelArtifact(layer_stats=stats, knn=knn, meta=meta)


def rejection_scores(artifact: ModelArtifact, dataset: EmbeddingSet) -> np.ndarray:
    """KNN rejection score per utterance, order preserved."""
    return knn_score_batch(artifact.knn, featurize(artifact.layer_stats, dataset))


def _split_ood(dataset: EmbeddingSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """is_ood mask plus closed-set predictions/truth for the known rows."""
    if dataset.labels is None:
        raise MissingLabels("evaluation needs ground-truth labels (-1 marks OOD)")
    if dataset.logits is None:
        raise MissingLogits("evaluation needs classifier logits for the closed set")
    labels = np.asarray(dataset.labels)
    is_ood = labels == -1
    known = ~is_ood
    pred_known = np.argmax(dataset.logits[known], axis=1)
    return is_ood, pred_known, labels[known]


def evaluate_artifact(artifact: ModelArtifact, test: EmbeddingSet) -> EvalReport:
    """Score a labeled test set with the fitted model and assemble the report."""
    is_ood, pred_known, truth_known = _split_ood(test)
    scores = rejection_scores(artifact, test)
    return evaluate(scores, is_ood, pred_known, truth_known, test.num_classes)


def compare_methods(
    train: EmbeddingSet,
    test: EmbeddingSet,
    *,
    k_neighbors: int = DEFAULT_K_NEIGHBORS,
    contamination: float = DEFAULT_CONTAMINATION,
    tanh: bool = True,
    calibrate_w: bool = True,
    ridge0: float = DEFAULT_RIDGE0,
) -> dict:
    """Run the multi-layer method and the reference detectors on one split.

    Every method is trained on the same train set in-process, scored on the
    same test set, and summarized by EER / AUROC / AUPR(IN) / AUPR(OUT).
    """
    is_ood, _, _ = _split_ood(test)

    artifact = fit_model(
        train,
        k_neighbors=k_neighbors,
        contamination=contamination,
        tanh=tanh,
        calibrate_w=calibrate_w,
        ridge0=ridge0,
    )
    md_model = fit_md(train, layer=-1, ridge0=ridge0)
    last = np.asarray(test.embeddings[:, -1, :], dtype=np.float64)

    method_scores = [
        ("multi_layer_knn", rejection_scores(artifact, test)),
        ("max_softmax", max_softmax_score_batch(test.logits)),
        ("md", md_score_batch(md_model, last)),
        ("rmd", rmd_score_batch(md_model, last)),
    ]
    methods = []
    for name, scores in method_scores:
        eer_value, threshold = eer(scores, is_ood)
        methods.append(
            {
                "method": name,
                "eer": eer_value,
                "eer_threshold": threshold,
                "auroc": auroc(scores, is_ood),
                "aupr_in": aupr(scores, is_ood, positive="in"),
                "aupr_out": aupr(scores, is_ood, positive="out"),
            }
        )
    return {
        "methods": methods,
        "n_test": test.n,
        "n_ood": int(np.asarray(is_ood).sum()),
    }
