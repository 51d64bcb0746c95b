"""Detection-style evaluation: F1 at a relative-distance threshold.

A predicted boundary counts as correct when it lies within ``theta * L``
frames of an unmatched ground-truth boundary (inclusive, so the exact
integer tolerance is testable).  Matching is greedy and one-to-one:
predictions are visited in ascending order and each takes the nearest still
unmatched ground-truth boundary in range, ties going to the smaller one.
Greedy matching can differ from the optimal assignment in rare interleaved
configurations; the test suite quantifies that gap against an exhaustive
oracle.

With several annotators per video, the annotator that maximizes the video's
F1 is kept (ties toward the lowest annotator index) and the kept counts are
accumulated over the corpus before computing corpus-level precision,
recall, and F1.  The benchmark summary is the mean F1 over thresholds 0.05,
0.10, ..., 0.50.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError
from .features import BoundaryAnnotation

THRESHOLD_SWEEP = tuple(round(0.05 * k, 2) for k in range(1, 11))


@dataclass(frozen=True)
class ThresholdResult:
    theta: float
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class EvalResult:
    per_threshold: tuple[ThresholdResult, ...]
    average_f1: float


def match_boundaries(pred: list[int], gt: list[int], length: int,
                     theta: float) -> tuple[int, int, int]:
    """Greedy one-to-one matching of predictions to ground truth.

    Parameters
    ----------
    pred, gt : list[int]
        Sorted boundary indices.
    length : int
        Video length in frames; the tolerance is ``theta * length``.
    theta : float
        Relative-distance threshold, > 0.

    Returns
    -------
    (tp, fp, fn)
        ``tp + fp == len(pred)`` and ``tp + fn == len(gt)``.
    """
    if theta <= 0:
        raise DomainError("theta must be positive")
    tol = theta * length
    unmatched = list(gt)
    tp = 0
    for p in sorted(pred):
        best = None
        best_dist = None
        for g in unmatched:
            d = abs(p - g)
            if d <= tol and (best_dist is None or d < best_dist
                             or (d == best_dist and g < best)):
                best, best_dist = g, d
        if best is not None:
            unmatched.remove(best)
            tp += 1
    return tp, len(pred) - tp, len(gt) - tp


def _f1_from_counts(tp: int, fp: int, fn: int) -> float:
    if tp + fp + fn == 0:
        return 1.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def f1_at(predictions: dict[str, list[int]],
          annotations: dict[str, BoundaryAnnotation],
          theta: float,
          annotator_rule: str = "max") -> tuple[float, float, float]:
    """Corpus-level precision, recall, and F1 at one threshold.

    Per video the prediction is compared against each annotator and the
    annotator maximizing that video's F1 is kept (``annotator_rule="max"``,
    ties toward the lowest index); ``"first"`` always scores against
    annotator 0.  Kept counts are accumulated over the corpus.
    """
    if annotator_rule not in ("max", "first"):
        raise DomainError(f"unknown annotator rule {annotator_rule!r}")
    total_tp = total_fp = total_fn = 0
    for vid in sorted(predictions):
        if vid not in annotations:
            raise DomainError(f"no annotation for predicted video {vid!r}")
        ann = annotations[vid]
        pred = sorted(predictions[vid])
        if any(not 1 <= b <= ann.length - 1 for b in pred):
            raise DomainError(f"{vid!r}: prediction outside [1, {ann.length - 1}]")
        lists = ann.annotators if annotator_rule == "max" else ann.annotators[:1]
        best = None
        best_f1 = -1.0
        for bounds in lists:
            counts = match_boundaries(pred, list(bounds), ann.length, theta)
            f1 = _f1_from_counts(*counts)
            if f1 > best_f1:
                best, best_f1 = counts, f1
        total_tp += best[0]
        total_fp += best[1]
        total_fn += best[2]
    precision = total_tp / (total_tp + total_fp) if total_tp + total_fp else 0.0
    recall = total_tp / (total_tp + total_fn) if total_tp + total_fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def average_f1(predictions: dict[str, list[int]],
               annotations: dict[str, BoundaryAnnotation],
               annotator_rule: str = "max") -> EvalResult:
    """Sweep thresholds 0.05..0.50 (step 0.05) and average the F1 column."""
    if not predictions:
        raise DomainError("cannot evaluate an empty corpus")
    rows = []
    for theta in THRESHOLD_SWEEP:
        p, r, f1 = f1_at(predictions, annotations, theta, annotator_rule)
        rows.append(ThresholdResult(theta=theta, precision=p, recall=r, f1=f1))
    avg = sum(row.f1 for row in rows) / len(rows)
    return EvalResult(per_threshold=tuple(rows), average_f1=avg)
