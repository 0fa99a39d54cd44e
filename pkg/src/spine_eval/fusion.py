"""Decision fusion between the image classifier and the lesion detector.

``gate``: on images the classifier calls normal (score below the cutoff), keep
only boxes above a confidence floor. ``boost``: average the classifier score
with the top box confidence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import Detection
from .errors import InputError, MissingClassifierScore

GATE = "gate"
BOOST = "boost"


@dataclass(frozen=True)
class FusionConfig:
    cutoff: float
    floor: float = 0.5

    def __post_init__(self):
        for name in ("cutoff", "floor"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InputError(f"{name} must be in [0, 1], got {value}")


def gate_detections(score: float, detections: Sequence[Detection],
                    config: FusionConfig) -> list[Detection]:
    if score >= config.cutoff:
        return list(detections)
    return [d for d in detections if d.confidence > config.floor]


def boost_classifier(score: float, detections: Sequence[Detection]) -> float:
    top = max((d.confidence for d in detections), default=0.0)
    return (score + top) / 2


def fuse_dataset(
    cls: Mapping[str, float],
    det: Mapping[str, Sequence[Detection]],
    config: FusionConfig,
    direction: str = GATE,
) -> dict:
    """Apply one fusion rule image by image.

    ``gate`` returns detections per image (every image of ``det``, in its
    order, possibly with an empty list); every detected image needs a
    classifier score. ``boost`` returns a score per image of ``cls``; images
    missing from ``det`` have no detections.
    """
    if direction == GATE:
        out = {}
        for image_id, dets in det.items():
            if image_id not in cls:
                raise MissingClassifierScore(image_id)
            out[image_id] = gate_detections(cls[image_id], dets, config)
        return out
    if direction == BOOST:
        return {image_id: boost_classifier(score, det.get(image_id, ()))
                for image_id, score in cls.items()}
    raise InputError(f"unknown fusion direction {direction!r}")
