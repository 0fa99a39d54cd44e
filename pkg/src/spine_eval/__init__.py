"""Evaluation and decision fusion for spine radiograph classifiers and lesion detectors."""

__version__ = "0.1.0"

from .classification import (
    LabeledScores,
    RocCurve,
    align_scores,
    auroc,
    confusion_at,
    ensemble_average,
    roc_curve,
    youden_optimal,
)
from .core import (
    ABNORMAL_LABELS,
    DETECTION_LABELS,
    BoundingBox,
    Detection,
    GroundTruthSet,
    ImageRecord,
    LesionLabel,
    OperatingPoint,
    parse_label,
    remap_to_detection_label,
    render_label,
    validate_record,
)
from .dataset_io import (
    compute_stats,
    parse_annotations,
    parse_classifier_predictions,
    parse_detector_predictions,
    stratified_split,
)
from .detection import MatchResult, average_precision, iou, match_class, mean_ap
from .fusion import FusionConfig, boost_classifier, fuse_dataset, gate_detections
from .resampling import BootstrapEstimate, bootstrap_ci, bootstrap_cis

__all__ = [
    "__version__",
    "LabeledScores",
    "RocCurve",
    "align_scores",
    "auroc",
    "confusion_at",
    "ensemble_average",
    "roc_curve",
    "youden_optimal",
    "ABNORMAL_LABELS",
    "DETECTION_LABELS",
    "BoundingBox",
    "Detection",
    "GroundTruthSet",
    "ImageRecord",
    "LesionLabel",
    "OperatingPoint",
    "parse_label",
    "remap_to_detection_label",
    "render_label",
    "validate_record",
    "compute_stats",
    "parse_annotations",
    "parse_classifier_predictions",
    "parse_detector_predictions",
    "stratified_split",
    "MatchResult",
    "average_precision",
    "iou",
    "match_class",
    "mean_ap",
    "FusionConfig",
    "boost_classifier",
    "fuse_dataset",
    "gate_detections",
    "BootstrapEstimate",
    "bootstrap_ci",
    "bootstrap_cis",
]
