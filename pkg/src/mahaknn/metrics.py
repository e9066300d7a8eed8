"""Detection and closed-set evaluation metrics.

Scores are oriented higher = more out-of-distribution throughout. All
metrics are rank-based or count-based and therefore invariant under any
strictly increasing transform of the scores:

* AUROC via the rank (Mann-Whitney) formulation: the probability that a
  random OOD score exceeds a random in-distribution score, ties counted
  half. Exact and tie-correct in O(n log n).
* AUPR as average precision (step integral over descending-score
  cut-points with ties grouped), not trapezoidal PR interpolation.
* EER from a sweep over the distinct observed scores, predicting OOD when
  score > threshold; the operating point minimizes |FPR - FNR| with ties
  broken toward smaller count error, then smaller threshold, and the
  reported value is (FP + FN) / n at that point.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import LabelOutOfRange, OneClassOnly


@dataclass(frozen=True)
class ConfusionCounts:
    """OOD-detection confusion at one operating point (OOD = positive)."""

    tp: int
    tn: int
    fp: int
    fn: int


@dataclass(frozen=True)
class EvalReport:
    """Full evaluation summary: detection metrics plus closed-set macro PRF."""

    auroc: float
    aupr_in: float
    aupr_out: float
    eer: float
    eer_threshold: float
    closed_precision: float
    closed_recall: float
    closed_f1: float
    counts: ConfusionCounts

    def to_dict(self) -> dict:
        return {
            "auroc": self.auroc,
            "aupr_in": self.aupr_in,
            "aupr_out": self.aupr_out,
            "eer": self.eer,
            "eer_threshold": self.eer_threshold,
            "closed_precision": self.closed_precision,
            "closed_recall": self.closed_recall,
            "closed_f1": self.closed_f1,
            "counts": {
                "tp": self.counts.tp,
                "tn": self.counts.tn,
                "fp": self.counts.fp,
                "fn": self.counts.fn,
            },
        }


def _check_two_classes(is_ood: np.ndarray) -> tuple[int, int]:
    n_pos = int(is_ood.sum())
    n_neg = int(is_ood.shape[0] - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly("need at least one OOD and one in-distribution sample")
    return n_pos, n_neg


def auroc(scores: np.ndarray, is_ood: np.ndarray) -> float:
    """Probability a random OOD score outranks a random ID score, ties half.

    Raises:
        OneClassOnly: Only one of the two classes is present.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    is_ood = np.asarray(is_ood, dtype=bool).ravel()
    n_pos, n_neg = _check_two_classes(is_ood)
    ranks = rankdata(scores, method="average")
    # Rank sums are integers or half-integers well below 2^53: exact.
    numer = float(ranks[is_ood].sum()) - n_pos * (n_pos + 1) / 2.0
    return numer / float(n_pos * n_neg)


def aupr(scores: np.ndarray, is_ood: np.ndarray, positive: str = "out") -> float:
    """Average precision with the chosen class as positive.

    positive="out" treats OOD as positive and ranks by score descending;
    positive="in" treats ID as positive and ranks by negated score. Tied
    scores collapse into a single cut-point. A degenerate input where every
    sample is positive returns 1.0 with a warning.

    Raises:
        OneClassOnly: The chosen positive class is absent.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    is_ood = np.asarray(is_ood, dtype=bool).ravel()
    if positive == "out":
        pos = is_ood
    elif positive == "in":
        pos = ~is_ood
        scores = -scores
    else:
        raise ValueError(f"positive must be 'in' or 'out', got {positive!r}")
    n_pos = int(pos.sum())
    if n_pos == 0:
        raise OneClassOnly(f"no positive samples with positive={positive!r}")
    if n_pos == scores.shape[0]:
        warnings.warn(
            "every sample belongs to the positive class; average precision is 1 by definition",
            RuntimeWarning,
            stacklevel=2,
        )
        return 1.0

    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    p = pos[order]
    # Group ties: cut only where the next score differs.
    boundary = np.nonzero(np.diff(s))[0]
    cuts = np.concatenate([boundary, [s.shape[0] - 1]])
    tp = np.cumsum(p)[cuts]
    total = cuts + 1
    terms = []
    recall_prev = 0.0
    for tp_i, tot_i in zip(tp.tolist(), total.tolist()):
        recall = tp_i / n_pos
        precision = tp_i / tot_i
        terms.append((recall - recall_prev) * precision)
        recall_prev = recall
    return math.fsum(terms)


def eer(scores: np.ndarray, is_ood: np.ndarray) -> tuple[float, float]:
    """Count-based equal error rate and its operating threshold.

    Sweeps every distinct score value t (predict OOD when score > t), picks
    the t minimizing |FPR - FNR| with ties broken toward smaller
    (FP + FN) / n and then smaller t, and returns ((FP + FN) / n, t) there.

    Raises:
        OneClassOnly: Only one of the two classes is present.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    is_ood = np.asarray(is_ood, dtype=bool).ravel()
    n_ood, n_id = _check_two_classes(is_ood)
    n = scores.shape[0]

    order = np.argsort(scores, kind="stable")
    s = scores[order]
    o = is_ood[order]
    boundary = np.nonzero(np.diff(s))[0]
    cuts = np.concatenate([boundary, [n - 1]])
    ood_le = np.cumsum(o)[cuts]  # OOD samples at or below each threshold
    all_le = cuts + 1

    best = None
    for idx in range(cuts.shape[0]):
        fn = int(ood_le[idx])
        fp = n_id - (int(all_le[idx]) - fn)
        fpr = fp / n_id
        fnr = fn / n_ood
        diff = abs(fpr - fnr)
        err = (fp + fn) / n
        key = (diff, err)
        if best is None or key < best[0]:
            best = (key, err, float(s[cuts[idx]]))
    return best[1], best[2]


def confusion_at(scores: np.ndarray, is_ood: np.ndarray, threshold: float) -> ConfusionCounts:
    """Confusion counts at a threshold (predict OOD when score > threshold)."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    is_ood = np.asarray(is_ood, dtype=bool).ravel()
    flagged = scores > threshold
    return ConfusionCounts(
        tp=int((flagged & is_ood).sum()),
        tn=int((~flagged & ~is_ood).sum()),
        fp=int((flagged & ~is_ood).sum()),
        fn=int((~flagged & is_ood).sum()),
    )


def closed_set_prf(
    pred: np.ndarray, truth: np.ndarray, num_classes: int
) -> tuple[float, float, float]:
    """Macro precision/recall/F1 over the known classes, 0/0 defined as 0.

    F1 is the macro average of per-class F1 values, not the harmonic mean
    of macro precision and macro recall.

    Raises:
        LabelOutOfRange: A label falls outside [0, num_classes).
    """
    pred = np.asarray(pred, dtype=np.int64).ravel()
    truth = np.asarray(truth, dtype=np.int64).ravel()
    if pred.shape != truth.shape:
        raise LabelOutOfRange(
            f"pred and truth lengths differ: {pred.shape[0]} vs {truth.shape[0]}"
        )
    for name, arr in (("pred", pred), ("truth", truth)):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise LabelOutOfRange(f"{name} labels outside [0, {num_classes})")

    precisions, recalls, f1s = [], [], []
    for c in range(num_classes):
        tp = int(((pred == c) & (truth == c)).sum())
        fp = int(((pred == c) & (truth != c)).sum())
        fn = int(((pred != c) & (truth == c)).sum())
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        precisions.append(p)
        recalls.append(r)
        f1s.append(f)
    m = float(num_classes)
    return (math.fsum(precisions) / m, math.fsum(recalls) / m, math.fsum(f1s) / m)


def evaluate(
    scores: np.ndarray,
    is_ood: np.ndarray,
    pred_known: np.ndarray,
    truth_known: np.ndarray,
    num_classes: int,
) -> EvalReport:
    """Assemble the full report; deterministic in its inputs."""
    eer_value, threshold = eer(scores, is_ood)
    precision, recall, f1 = closed_set_prf(pred_known, truth_known, num_classes)
    return EvalReport(
        auroc=auroc(scores, is_ood),
        aupr_in=aupr(scores, is_ood, positive="in"),
        aupr_out=aupr(scores, is_ood, positive="out"),
        eer=eer_value,
        eer_threshold=threshold,
        closed_precision=precision,
        closed_recall=recall,
        closed_f1=f1,
        counts=confusion_at(scores, is_ood, threshold),
    )


def format_metric_table(rows: list[tuple[str, float, float, float, float]]) -> str:
    """Aligned text table of (method, EER, AUROC, AUPR(IN), AUPR(OUT)) rows."""
    header = ("method", "EER", "AUROC", "AUPR(IN)", "AUPR(OUT)")
    body = [
        (name, f"{e:.4f}", f"{a:.4f}", f"{pin:.4f}", f"{pout:.4f}")
        for name, e, a, pin, pout in rows
    ]
    widths = [
        max(len(header[j]), *(len(row[j]) for row in body)) for j in range(len(header))
    ]
    lines = ["  ".join(h.ljust(widths[j]) for j, h in enumerate(header))]
    for row in body:
        lines.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)))
    return "\n".join(lines) + "\n"


def format_report_table(report: EvalReport) -> str:
    """Aligned text rendering of one EvalReport."""
    table = format_metric_table(
        [("multi_layer_knn", report.eer, report.auroc, report.aupr_in, report.aupr_out)]
    )
    closed = (
        f"closed-set macro  precision={report.closed_precision:.4f}  "
        f"recall={report.closed_recall:.4f}  f1={report.closed_f1:.4f}\n"
    )
    c = report.counts
    counts = (
        f"confusion at EER threshold {report.eer_threshold:.9g}: "
        f"tp={c.tp} tn={c.tn} fp={c.fp} fn={c.fn}\n"
    )
    return table + closed + counts
