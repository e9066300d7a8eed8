"""Joint classify-or-reject decisions.

An utterance is assigned the argmax known class when its rejection score is
at or below the threshold, and the reject class otherwise. With M known
classes the reject class is encoded as integer M (0-based labels 0..M-1 for
known classes).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .detector import knn_score_batch
from .errors import EmptyLogits, MissingLogits
from .featurizer import featurize

if TYPE_CHECKING:
    from .tensorio import EmbeddingSet, ModelArtifact


@dataclass(frozen=True)
class JointPrediction:
    """Decision for one utterance.

    label is in 0..M-1 for an accepted known class, or M for reject;
    rejection_score is the KNN score the decision was taken on.
    """

    label: int
    rejection_score: float
    class_scores: tuple[float, ...] | None = None


def decide(logits: np.ndarray, g: float, delta: float) -> JointPrediction:
    """Accept the argmax class when g <= delta, otherwise reject.

    The boundary g == delta accepts. Argmax ties go to the lowest class
    index.

    Raises:
        EmptyLogits: logits has no entries.
    """
    logits = np.asarray(logits, dtype=np.float64).ravel()
    m = logits.shape[0]
    if m == 0:
        raise EmptyLogits("cannot decide on an empty logit vector")
    label = int(np.argmax(logits)) if g <= delta else m
    return JointPrediction(
        label=label,
        rejection_score=float(g),
        class_scores=tuple(float(v) for v in logits),
    )


def decide_batch(
    dataset: "EmbeddingSet",
    model: "ModelArtifact",
    delta_override: float | None = None,
) -> list[JointPrediction]:
    """Featurize, score, and decide every utterance; order is preserved.

    Raises:
        MissingLogits: The set carries no classifier outputs.
        DimensionMismatch: Set and model disagree on shape.
    """
    if dataset.logits is None:
        raise MissingLogits("joint decisions need classifier logits")
    features = featurize(model.layer_stats, dataset)
    scores = knn_score_batch(model.knn, features)
    delta = model.knn.delta if delta_override is None else float(delta_override)
    m = dataset.num_classes
    accepted = np.argmax(dataset.logits, axis=1)
    return [
        JointPrediction(
            label=int(accepted[i]) if scores[i] <= delta else m,
            rejection_score=float(scores[i]),
        )
        for i in range(dataset.n)
    ]


def format_decisions_csv(predictions: list[JointPrediction]) -> str:
    """Render decisions as the stable CSV: index,label,rejection_score."""
    lines = ["index,label,rejection_score"]
    for i, p in enumerate(predictions):
        lines.append(f"{i},{p.label},{p.rejection_score:.9g}")
    return "\n".join(lines) + "\n"
