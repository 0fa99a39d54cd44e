"""Normal-vs-abnormal classification metrics: ROC/AUROC, confusion-matrix
metrics at a cutoff, the Youden-optimal operating point, and ensembling.

Decision rule throughout: an image is predicted abnormal iff ``score >= cutoff``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import GroundTruthSet, OperatingPoint
from .errors import (
    EmptyData,
    EmptyEnsemble,
    InputError,
    MismatchedImageSets,
    MissingPrediction,
    SingleClassOnly,
    UnknownImage,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LabeledScores:
    """Parallel arrays of binary labels (1 = abnormal) and scores in [0, 1].

    ``groups`` optionally holds a study id per item for study-level resampling.
    """

    labels: np.ndarray
    scores: np.ndarray
    image_ids: tuple[str, ...] | None = None
    groups: tuple[str, ...] | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int8)
        scores = np.asarray(self.scores, dtype=np.float64)
        if labels.ndim != 1 or labels.shape != scores.shape:
            raise InputError("labels and scores must be 1-d arrays of equal length")
        if labels.size == 0:
            raise EmptyData("no labeled scores")
        if not np.all((labels == 0) | (labels == 1)):
            raise InputError("labels must be 0 or 1")
        if not np.all((scores >= 0.0) & (scores <= 1.0)):
            raise InputError("scores must lie in [0, 1]")
        for name in ("image_ids", "groups"):
            value = getattr(self, name)
            if value is not None and len(value) != labels.size:
                raise InputError(f"{name} length does not match labels")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "scores", scores)

    def __len__(self) -> int:
        return int(self.labels.size)

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    @property
    def n_negative(self) -> int:
        return len(self) - self.n_positive

    def take(self, indices: np.ndarray) -> "LabeledScores":
        return LabeledScores(self.labels[indices], self.scores[indices])

    def flipped(self) -> "LabeledScores":
        return LabeledScores(1 - self.labels, self.scores, self.image_ids, self.groups)


def _require_both(data: LabeledScores) -> tuple[int, int]:
    pos = data.n_positive
    neg = len(data) - pos
    if pos == 0 or neg == 0:
        raise SingleClassOnly()
    return pos, neg


def align_scores(
    gt: GroundTruthSet, scores: Mapping[str, float], strict: bool = True
) -> LabeledScores:
    """Pair every annotated image with its score, in annotation order.

    Annotated images without a score are always an error. Scored images absent
    from the annotations raise under ``strict`` and are dropped with a warning
    otherwise.
    """
    extra = [k for k in scores if k not in gt.records]
    if extra:
        if strict:
            raise UnknownImage(f"prediction for unannotated image {extra[0]!r} "
                               f"({len(extra)} such images)")
        log.warning("ignoring %d predicted images absent from annotations", len(extra))
    ids, labels, values, groups = [], [], [], []
    for record in gt:
        if record.image_id not in scores:
            raise MissingPrediction(record.image_id)
        ids.append(record.image_id)
        labels.append(int(record.abnormal))
        values.append(scores[record.image_id])
        groups.append(record.study_id)
    return LabeledScores(np.array(labels), np.array(values, dtype=float), tuple(ids), tuple(groups))


def ensemble_average(per_model_scores: Sequence[Mapping[str, float]]) -> dict[str, float]:
    """Unweighted per-image mean over models that all score the same images."""
    if not per_model_scores:
        raise EmptyEnsemble("at least one model is required")
    first = per_model_scores[0]
    keys = set(first)
    for i, other in enumerate(per_model_scores[1:], start=1):
        if set(other) != keys:
            diff = sorted(keys.symmetric_difference(other))
            raise MismatchedImageSets(
                f"model {i} scores a different image set (e.g. {diff[0]!r})")
    out = {}
    for image_id in first:
        values = [m[image_id] for m in per_model_scores]
        mean = math.fsum(values) / len(values)
        # rounding may push the mean one ulp outside the input range
        out[image_id] = min(max(mean, min(values)), max(values))
    return out


@dataclass(frozen=True, eq=False)
class RocCurve:
    """ROC vertices from (0, 0) to (1, 1); ``thresholds[0]`` is +inf."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    tps: np.ndarray
    fps: np.ndarray

    def __len__(self) -> int:
        return int(self.fpr.size)


def roc_curve(data: LabeledScores) -> RocCurve:
    """Sweep thresholds over the distinct scores in descending order.

    Tied scores collapse into one vertex, so a tie between classes shows up as
    a diagonal segment.
    """
    pos, neg = _require_both(data)
    order = np.argsort(-data.scores, kind="stable")
    s = data.scores[order]
    y = data.labels[order].astype(np.int64)
    last = np.flatnonzero(np.diff(s) != 0)
    last = np.append(last, s.size - 1)
    tps = np.concatenate(([0], np.cumsum(y)[last]))
    fps = np.concatenate(([0], last + 1 - tps[1:]))
    thresholds = np.concatenate(([np.inf], s[last]))
    return RocCurve(fps / neg, tps / pos, thresholds, tps, fps)


def auroc(data: LabeledScores) -> float:
    """Trapezoidal area under the ROC curve (ties count one half)."""
    curve = roc_curve(data)
    tps, fps = curve.tps, curve.fps
    # twice the area in count units, exact in integer arithmetic
    doubled = int(np.sum(np.diff(fps) * (tps[1:] + tps[:-1])))
    return doubled / (2 * int(tps[-1]) * int(fps[-1]))


@dataclass(frozen=True)
class Confusion:
    cutoff: float
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def sensitivity(self) -> float:
        return self.tp / (self.tp + self.fn)

    @property
    def specificity(self) -> float:
        return self.tn / (self.tn + self.fp)

    @property
    def precision(self) -> float:
        predicted = self.tp + self.fp
        return self.tp / predicted if predicted else 0.0

    @property
    def f1(self) -> float:
        return 2 * self.tp / (2 * self.tp + self.fp + self.fn)

    @property
    def youden(self) -> float:
        return self.sensitivity + self.specificity - 1


def confusion_at(data: LabeledScores, cutoff: float) -> Confusion:
    _require_both(data)
    predicted = data.scores >= cutoff
    actual = data.labels == 1
    tp = int(np.count_nonzero(predicted & actual))
    fp = int(np.count_nonzero(predicted & ~actual))
    fn = int(np.count_nonzero(~predicted & actual))
    tn = int(np.count_nonzero(~predicted & ~actual))
    return Confusion(float(cutoff), tp, fp, tn, fn)


def sensitivity(data: LabeledScores, cutoff: float) -> float:
    return confusion_at(data, cutoff).sensitivity


def specificity(data: LabeledScores, cutoff: float) -> float:
    return confusion_at(data, cutoff).specificity


def f1_score(data: LabeledScores, cutoff: float) -> float:
    return confusion_at(data, cutoff).f1


def candidate_cutoffs(data: LabeledScores) -> np.ndarray:
    """Distinct observed scores, ascending, followed by +inf."""
    return np.append(np.unique(data.scores), np.inf)


def youden_optimal(data: LabeledScores) -> OperatingPoint:
    """Cutoff maximizing sensitivity + specificity - 1 over :func:`candidate_cutoffs`.

    Ties in J go to the smallest cutoff, i.e. the most sensitive one.
    """
    pos, neg = _require_both(data)
    cuts = candidate_cutoffs(data)
    pos_scores = np.sort(data.scores[data.labels == 1])
    neg_scores = np.sort(data.scores[data.labels == 0])
    tp = pos - np.searchsorted(pos_scores, cuts, side="left")
    tn = np.searchsorted(neg_scores, cuts, side="left")
    q = tp / pos
    r = tn / neg
    j = q + r - 1
    best = int(np.argmax(j))
    return OperatingPoint(float(cuts[best]), float(q[best]), float(r[best]), float(j[best]))
