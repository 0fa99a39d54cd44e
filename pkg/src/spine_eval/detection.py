"""Box matching and average precision at a fixed IoU threshold.

Predictions are matched greedily in confidence order, one ground-truth box per
prediction at most. AP is the mean of the interpolated precision at the 101
recall levels 0.00, 0.01, ..., 1.00.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import (
    DETECTION_LABELS,
    BoundingBox,
    Detection,
    GroundTruthSet,
    LesionLabel,
    remap_to_detection_label,
)
from .errors import DegenerateBox, InputError, MixedClasses, MixedImages, NoGroundTruth, UnknownImage

RECALL_STEPS = 100  # grid has RECALL_STEPS + 1 points


def iou(a: BoundingBox, b: BoundingBox) -> float:
    if a.area <= 0 or b.area <= 0:
        raise DegenerateBox("IoU needs boxes of positive area")
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0 or h <= 0:
        return 0.0
    inter = w * h
    return inter / (a.area + b.area - inter)


def iou_matrix(preds: Sequence[BoundingBox], gts: Sequence[BoundingBox]) -> np.ndarray:
    """Pairwise IoU, shape ``(len(preds), len(gts))``."""
    p = np.array([[b.x_min, b.y_min, b.x_max, b.y_max] for b in preds], dtype=float).reshape(-1, 4)
    g = np.array([[b.x_min, b.y_min, b.x_max, b.y_max] for b in gts], dtype=float).reshape(-1, 4)
    if np.any(p[:, 2] <= p[:, 0]) or np.any(p[:, 3] <= p[:, 1]) \
            or np.any(g[:, 2] <= g[:, 0]) or np.any(g[:, 3] <= g[:, 1]):
        raise DegenerateBox("IoU needs boxes of positive area")
    w = np.minimum(p[:, None, 2], g[None, :, 2]) - np.maximum(p[:, None, 0], g[None, :, 0])
    h = np.minimum(p[:, None, 3], g[None, :, 3]) - np.maximum(p[:, None, 1], g[None, :, 1])
    inter = np.clip(w, 0, None) * np.clip(h, 0, None)
    area_p = (p[:, 2] - p[:, 0]) * (p[:, 3] - p[:, 1])
    area_g = (g[:, 2] - g[:, 0]) * (g[:, 3] - g[:, 1])
    return inter / (area_p[:, None] + area_g[None, :] - inter)


def _confidence_order(confidences: Sequence[float]) -> list[int]:
    # stable: equal confidences keep input order
    return sorted(range(len(confidences)), key=lambda i: -confidences[i])


def _match_flags(gt_boxes: Sequence[BoundingBox], preds: Sequence[Detection],
                 iou_threshold: float) -> list[bool]:
    """True-positive flag per prediction, in input order."""
    flags = [False] * len(preds)
    if not preds or not gt_boxes:
        return flags
    ious = iou_matrix([d.box for d in preds], gt_boxes)
    taken = np.zeros(len(gt_boxes), dtype=bool)
    for i in _confidence_order([d.confidence for d in preds]):
        row = np.where(taken, -1.0, ious[i])
        j = int(np.argmax(row))  # first index wins IoU ties
        if row[j] >= iou_threshold:
            taken[j] = True
            flags[i] = True
    return flags


@dataclass(frozen=True, eq=False)
class MatchResult:
    """Predictions of one class, sorted by confidence descending, with TP flags."""

    confidences: np.ndarray
    is_tp: np.ndarray
    n_gt: int

    def __post_init__(self):
        object.__setattr__(self, "confidences", np.asarray(self.confidences, dtype=float))
        object.__setattr__(self, "is_tp", np.asarray(self.is_tp, dtype=bool))
        if self.confidences.shape != self.is_tp.shape:
            raise InputError("confidences and is_tp differ in length")
        if int(self.is_tp.sum()) > self.n_gt:
            raise InputError("more true positives than ground-truth boxes")

    @property
    def n_tp(self) -> int:
        return int(self.is_tp.sum())


def match_class(gt_boxes: Sequence[BoundingBox], predictions: Sequence[Detection],
                iou_threshold: float = 0.5) -> MatchResult:
    """Greedy one-to-one matching within a single image and class.

    Each prediction, highest confidence first, takes the still-unmatched
    ground-truth box of highest IoU when that IoU reaches ``iou_threshold``.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise InputError(f"IoU threshold must be in (0, 1], got {iou_threshold}")
    labels = {b.label for b in gt_boxes} | {d.label for d in predictions}
    if len(labels) > 1:
        raise MixedClasses(f"boxes span several classes: {sorted(l.value for l in labels)}")
    if len({d.image_id for d in predictions}) > 1:
        raise MixedImages("predictions span several images")
    flags = _match_flags(gt_boxes, predictions, iou_threshold)
    order = _confidence_order([d.confidence for d in predictions])
    return MatchResult(
        np.array([predictions[i].confidence for i in order], dtype=float),
        np.array([flags[i] for i in order], dtype=bool),
        len(gt_boxes),
    )


@dataclass(frozen=True, eq=False)
class PrCurve:
    recall: np.ndarray
    precision: np.ndarray
    cum_tp: np.ndarray
    n_gt: int


def pr_curve(matches: MatchResult) -> PrCurve:
    cum_tp = np.cumsum(matches.is_tp, dtype=np.int64)
    ranks = np.arange(1, cum_tp.size + 1)
    if matches.n_gt:
        recall = cum_tp / matches.n_gt
    else:
        recall = np.zeros(cum_tp.size)
    return PrCurve(recall, cum_tp / ranks if ranks.size else np.zeros(0), cum_tp, matches.n_gt)


def interpolated_precision(curve: PrCurve) -> np.ndarray:
    """Interpolated precision at each of the 101 recall levels.

    Level k/100 is reached when ``100 * cum_tp >= k * n_gt``, compared in
    integers so recall values like 0.29 are never lost to rounding.
    """
    n = curve.cum_tp.size
    if n == 0 or curve.n_gt == 0:
        return np.zeros(RECALL_STEPS + 1)
    # best precision over all points at or after i (recall is non-decreasing)
    envelope = np.append(np.maximum.accumulate(curve.precision[::-1])[::-1], 0.0)
    # highest grid level reached at each point; non-decreasing
    reached = (RECALL_STEPS * curve.cum_tp) // curve.n_gt
    first = np.searchsorted(reached, np.arange(RECALL_STEPS + 1), side="left")
    return envelope[first]


def average_precision(matches: MatchResult) -> float:
    if matches.n_gt < 1:
        raise NoGroundTruth()
    return float(np.mean(interpolated_precision(pr_curve(matches))))


@dataclass(frozen=True)
class DetectionReport:
    """Per-class AP (``None`` for classes without ground truth) and their mean."""

    ap: Mapping[LesionLabel, float | None]
    map: float | None
    n_gt: Mapping[LesionLabel, int]
    n_pred: Mapping[LesionLabel, int]
    iou_threshold: float
    matches: Mapping[LesionLabel, MatchResult] = field(default_factory=dict, repr=False)


def _image_flags(args):
    gt_boxes, dets, iou_threshold = args
    out = {}
    for label in DETECTION_LABELS:
        g = [b for b in gt_boxes if b.label is label]
        p = [d for d in dets if d.label is label]
        if p:
            out[label] = (p, _match_flags(g, p, iou_threshold))
    return out


def mean_ap(
    gt: GroundTruthSet,
    predictions: Mapping[str, Sequence[Detection]],
    iou_threshold: float = 0.5,
    threads: int = 1,
) -> DetectionReport:
    """Per-class AP pooled over images, and mAP over classes with ground truth.

    Ground-truth labels are remapped to the seven detection classes first.
    Matching runs per image; pooled predictions are ordered by confidence with
    ties broken by their order in ``predictions``. Predictions for images not
    in ``gt`` raise :class:`UnknownImage`.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise InputError(f"IoU threshold must be in (0, 1], got {iou_threshold}")
    unknown = [k for k in predictions if k not in gt.records]
    if unknown:
        raise UnknownImage(f"predictions for unannotated image {unknown[0]!r}")

    n_gt = {label: 0 for label in DETECTION_LABELS}
    gt_boxes: dict[str, list[BoundingBox]] = {}
    for record in gt:
        boxes = []
        for b in record.boxes:
            label = remap_to_detection_label(b.label)
            n_gt[label] += 1
            boxes.append(BoundingBox(b.x_min, b.y_min, b.x_max, b.y_max, label))
        gt_boxes[record.image_id] = boxes

    jobs = [(gt_boxes[image_id], list(dets), iou_threshold)
            for image_id, dets in predictions.items()]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_image = list(pool.map(_image_flags, jobs))
    else:
        per_image = [_image_flags(job) for job in jobs]

    pooled: dict[LesionLabel, tuple[list[float], list[bool]]] = {
        label: ([], []) for label in DETECTION_LABELS}
    for result in per_image:
        for label, (dets, flags) in result.items():
            pooled[label][0].extend(d.confidence for d in dets)
            pooled[label][1].extend(flags)

    ap: dict[LesionLabel, float | None] = {}
    matches: dict[LesionLabel, MatchResult] = {}
    n_pred = {}
    for label in DETECTION_LABELS:
        confs, flags = pooled[label]
        order = _confidence_order(confs)
        m = MatchResult(np.array([confs[i] for i in order], dtype=float),
                        np.array([flags[i] for i in order], dtype=bool), n_gt[label])
        matches[label] = m
        n_pred[label] = len(confs)
        ap[label] = average_precision(m) if n_gt[label] else None
    present = [v for v in ap.values() if v is not None]
    mean = float(np.mean(present)) if present else None
    return DetectionReport(ap, mean, n_gt, n_pred, iou_threshold, matches)
