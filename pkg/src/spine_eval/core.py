"""Domain types, the lesion vocabulary, and record validation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import (
    DuplicateImageId,
    InvalidBox,
    InvalidRecord,
    NoFindingNotMappable,
    UnknownLabel,
)


class LesionLabel(str, enum.Enum):
    """The 13 abnormal findings plus "No finding", in table order (LT1..LT13)."""

    ANKYLOSIS = "Ankylosis"
    DISC_SPACE_NARROWING = "Disc space narrowing"
    ENTHESOPHYTES = "Enthesophytes"
    FORAMINAL_STENOSIS = "Foraminal stenosis"
    FRACTURE = "Fracture"
    OSTEOPHYTES = "Osteophytes"
    SCLEROTIC_LESION = "Sclerotic lesion"
    SPONDYLOLYSTHESIS = "Spondylolysthesis"
    SUBCHONDRAL_SCLEROSIS = "Subchondral sclerosis"
    SURGICAL_IMPLANT = "Surgical implant"
    VERTEBRAL_COLLAPSE = "Vertebral collapse"
    FOREIGN_BODY = "Foreign body"
    OTHER_LESIONS = "Other lesions"
    NO_FINDING = "No finding"

    @property
    def code(self) -> str | None:
        """Short column code such as ``"LT6"``; ``None`` for "No finding"."""
        if self is LesionLabel.NO_FINDING:
            return None
        return f"LT{_ORDER.index(self) + 1}"

    def __str__(self) -> str:
        return self.value


_ORDER = tuple(LesionLabel)

#: Abnormal findings, LT1..LT13.
ABNORMAL_LABELS: tuple[LesionLabel, ...] = _ORDER[:13]

#: The seven detector targets, in report column order (LT2, LT4, ..., LT13).
DETECTION_LABELS: tuple[LesionLabel, ...] = (
    LesionLabel.DISC_SPACE_NARROWING,
    LesionLabel.FORAMINAL_STENOSIS,
    LesionLabel.OSTEOPHYTES,
    LesionLabel.SPONDYLOLYSTHESIS,
    LesionLabel.SURGICAL_IMPLANT,
    LesionLabel.VERTEBRAL_COLLAPSE,
    LesionLabel.OTHER_LESIONS,
)

_BY_NAME = {label.value: label for label in LesionLabel}


def parse_label(raw: str) -> LesionLabel:
    """Canonicalize a label string.

    Surrounding whitespace is stripped and the first letter upper-cased; the
    result must then match a canonical name exactly.
    """
    text = raw.strip()
    if text:
        text = text[0].upper() + text[1:]
    try:
        return _BY_NAME[text]
    except KeyError:
        raise UnknownLabel(raw) from None


def render_label(label: LesionLabel) -> str:
    return label.value


def parse_detection_label(raw: str) -> LesionLabel:
    label = parse_label(raw)
    if label not in DETECTION_LABELS:
        raise UnknownLabel(raw)
    return label


def remap_to_detection_label(label: LesionLabel) -> LesionLabel:
    """Collapse rare findings into "Other lesions"; detector targets map to themselves."""
    if label is LesionLabel.NO_FINDING:
        raise NoFindingNotMappable()
    if label in DETECTION_LABELS:
        return label
    return LesionLabel.OTHER_LESIONS


@dataclass(frozen=True)
class BoundingBox:
    """Half-open pixel rectangle ``[x_min, x_max) x [y_min, y_max)``."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    label: LesionLabel

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def problems(self, width: int | None = None, height: int | None = None) -> list[str]:
        """Return every invariant this box violates (empty when valid)."""
        out = []
        if self.label is LesionLabel.NO_FINDING:
            out.append("'No finding' cannot label a box")
        if min(self.x_min, self.y_min, self.x_max, self.y_max) < 0:
            out.append("negative coordinate")
        if not self.x_min < self.x_max:
            out.append("zero width" if self.x_min == self.x_max else "x_max < x_min")
        if not self.y_min < self.y_max:
            out.append("zero height" if self.y_min == self.y_max else "y_max < y_min")
        if width is not None and self.x_max > width:
            out.append(f"exceeds bounds: x_max {self.x_max} > width {width}")
        if height is not None and self.y_max > height:
            out.append(f"exceeds bounds: y_max {self.y_max} > height {height}")
        return out


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    study_id: str
    width: int
    height: int
    boxes: tuple[BoundingBox, ...] = ()
    age: int | None = None
    sex: str | None = None

    @property
    def abnormal(self) -> bool:
        return bool(self.boxes)


def validate_record(record: ImageRecord, line: int | None = None) -> ImageRecord:
    """Return ``record`` unchanged if it is valid.

    Raises :class:`InvalidBox` listing every bad box, or :class:`InvalidRecord`
    when the image itself is malformed.
    """
    if not record.image_id:
        raise InvalidRecord("empty image_id", line)
    for name in ("width", "height"):
        value = getattr(record, name)
        if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
            raise InvalidRecord(f"image {record.image_id!r}: {name} must be a positive integer", line)
    if record.sex is not None and record.sex not in ("M", "F"):
        raise InvalidRecord(f"image {record.image_id!r}: sex must be 'M' or 'F'", line)
    problems = [
        (i, reason)
        for i, box in enumerate(record.boxes)
        for reason in box.problems(record.width, record.height)
    ]
    if problems:
        raise InvalidBox(problems, line, record.image_id)
    return record


@dataclass(frozen=True)
class GroundTruthSet:
    """Validated annotations keyed by image, in file order."""

    records: Mapping[str, ImageRecord]
    studies: Mapping[str, frozenset[str]] = field(init=False)

    def __post_init__(self):
        index: dict[str, set[str]] = {}
        for image_id, record in self.records.items():
            index.setdefault(record.study_id, set()).add(image_id)
        object.__setattr__(self, "records", MappingProxyType(dict(self.records)))
        object.__setattr__(
            self, "studies", MappingProxyType({k: frozenset(v) for k, v in index.items()})
        )

    @classmethod
    def from_records(cls, records: Iterable[ImageRecord]) -> "GroundTruthSet":
        out: dict[str, ImageRecord] = {}
        for record in records:
            if record.image_id in out:
                raise DuplicateImageId(record.image_id)
            out[record.image_id] = validate_record(record)
        return cls(out)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records.values())

    def subset(self, image_ids: Iterable[str]) -> "GroundTruthSet":
        keep = set(image_ids)
        return GroundTruthSet({k: v for k, v in self.records.items() if k in keep})


@dataclass(frozen=True)
class Detection:
    image_id: str
    box: BoundingBox
    confidence: float

    @property
    def label(self) -> LesionLabel:
        return self.box.label


@dataclass(frozen=True)
class ClassifierPrediction:
    image_id: str
    score: float


@dataclass(frozen=True)
class OperatingPoint:
    """A cutoff with its sensitivity, specificity and Youden index."""

    cutoff: float
    sensitivity: float
    specificity: float
    youden: float
