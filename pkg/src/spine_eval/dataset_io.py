"""Reading and writing annotation/prediction JSONL, dataset statistics, and
the study-level stratified split."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Hashable, Iterable, Iterator, Mapping

import numpy as np

from .core import (
    ABNORMAL_LABELS,
    BoundingBox,
    Detection,
    GroundTruthSet,
    ImageRecord,
    LesionLabel,
    parse_detection_label,
    parse_label,
    validate_record,
)
from .errors import (
    ConfidenceOutOfRange,
    DuplicateImageId,
    EmptyDataset,
    InputError,
    InvalidBox,
    InvalidFraction,
    InvalidRecord,
    MalformedJson,
    ScoreOutOfRange,
    UnknownLabel,
)

TRAIN = "train"
TEST = "test"


# -- parsing helpers ---------------------------------------------------------

def _iter_json_lines(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise MalformedJson(f"invalid JSON: {exc.msg}", lineno) from None
            if not isinstance(obj, dict):
                raise MalformedJson("expected a JSON object", lineno)
            yield lineno, obj


def _require(obj: dict, key: str, kind, lineno: int) -> Any:
    if key not in obj:
        raise MalformedJson(f"missing field {key!r}", lineno)
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, kind):
        raise MalformedJson(f"field {key!r} has wrong type {type(value).__name__}", lineno)
    return value


_NUMBER = (int, float)


def _coords(obj: dict, lineno: int) -> tuple[float, float, float, float]:
    return tuple(_require(obj, k, _NUMBER, lineno) for k in ("x_min", "y_min", "x_max", "y_max"))


def _probability(value: float) -> bool:
    return math.isfinite(value) and 0.0 <= value <= 1.0


# -- ground truth ------------------------------------------------------------

def _record_from_json(obj: dict, lineno: int) -> ImageRecord:
    image_id = _require(obj, "image_id", str, lineno)
    study_id = _require(obj, "study_id", str, lineno)
    width = _require(obj, "width", int, lineno)
    height = _require(obj, "height", int, lineno)
    raw_boxes = _require(obj, "boxes", list, lineno)
    age = obj.get("age")
    if age is not None and (isinstance(age, bool) or not isinstance(age, int)):
        raise MalformedJson("field 'age' must be an integer", lineno)
    sex = obj.get("sex")
    if sex is not None and sex not in ("M", "F"):
        raise InvalidRecord(f"field 'sex' must be 'M' or 'F', got {sex!r}", lineno)

    boxes = []
    for i, raw in enumerate(raw_boxes):
        if not isinstance(raw, dict):
            raise MalformedJson(f"box {i} is not an object", lineno)
        try:
            label = parse_label(_require(raw, "label", str, lineno))
        except UnknownLabel as exc:
            raise UnknownLabel(exc.raw, lineno) from None
        boxes.append(BoundingBox(*_coords(raw, lineno), label=label))
    record = ImageRecord(image_id, study_id, width, height, tuple(boxes), age, sex)
    return validate_record(record, lineno)


def parse_annotations(path: str | Path) -> GroundTruthSet:
    """Read a ground-truth JSONL file; all errors carry the offending line number."""
    records: dict[str, ImageRecord] = {}
    for lineno, obj in _iter_json_lines(path):
        record = _record_from_json(obj, lineno)
        if record.image_id in records:
            raise DuplicateImageId(record.image_id, lineno)
        records[record.image_id] = record
    return GroundTruthSet(records)


def _box_json(box: BoundingBox) -> dict:
    return {"label": box.label.value, "x_min": box.x_min, "y_min": box.y_min,
            "x_max": box.x_max, "y_max": box.y_max}


def record_to_json(record: ImageRecord) -> dict:
    obj: dict[str, Any] = {
        "image_id": record.image_id,
        "study_id": record.study_id,
        "width": record.width,
        "height": record.height,
        "boxes": [_box_json(b) for b in record.boxes],
    }
    if record.age is not None:
        obj["age"] = record.age
    if record.sex is not None:
        obj["sex"] = record.sex
    return obj


def _dump_lines(objs: Iterable[dict]) -> str:
    return "".join(json.dumps(o, ensure_ascii=False) + "\n" for o in objs)


def serialize_annotations(gt: GroundTruthSet) -> str:
    return _dump_lines(record_to_json(r) for r in gt)


def write_annotations(gt: GroundTruthSet, path: str | Path) -> None:
    Path(path).write_text(serialize_annotations(gt), encoding="utf-8", newline="\n")


# -- predictions -------------------------------------------------------------

def parse_classifier_predictions(path: str | Path) -> dict[str, float]:
    scores: dict[str, float] = {}
    for lineno, obj in _iter_json_lines(path):
        image_id = _require(obj, "image_id", str, lineno)
        score = _require(obj, "score", _NUMBER, lineno)
        if not _probability(score):
            raise ScoreOutOfRange(f"score {score} outside [0, 1]", lineno)
        if image_id in scores:
            raise DuplicateImageId(image_id, lineno)
        scores[image_id] = float(score)
    return scores


def serialize_classifier_predictions(scores: Mapping[str, float]) -> str:
    return _dump_lines({"image_id": k, "score": v} for k, v in scores.items())


def write_classifier_predictions(scores: Mapping[str, float], path: str | Path) -> None:
    Path(path).write_text(serialize_classifier_predictions(scores), encoding="utf-8", newline="\n")


def parse_detector_predictions(path: str | Path) -> dict[str, list[Detection]]:
    """Read detector output grouped by image, preserving file order.

    Only the seven detector classes are accepted. An image may appear on more
    than one line; its detections are concatenated in order.
    """
    out: dict[str, list[Detection]] = {}
    for lineno, obj in _iter_json_lines(path):
        image_id = _require(obj, "image_id", str, lineno)
        raw_dets = _require(obj, "detections", list, lineno)
        dets = out.setdefault(image_id, [])
        problems = []
        for i, raw in enumerate(raw_dets):
            if not isinstance(raw, dict):
                raise MalformedJson(f"detection {i} is not an object", lineno)
            try:
                label = parse_detection_label(_require(raw, "label", str, lineno))
            except UnknownLabel as exc:
                raise UnknownLabel(exc.raw, lineno) from None
            conf = _require(raw, "confidence", _NUMBER, lineno)
            if not _probability(conf):
                raise ConfidenceOutOfRange(f"detection {i}: confidence {conf} outside [0, 1]", lineno)
            box = BoundingBox(*_coords(raw, lineno), label=label)
            problems.extend((i, reason) for reason in box.problems())
            dets.append(Detection(image_id, box, float(conf)))
        if problems:
            raise InvalidBox(problems, lineno, image_id)
    return out


def detections_to_json(image_id: str, detections: Iterable[Detection]) -> dict:
    return {
        "image_id": image_id,
        "detections": [
            {"label": d.label.value, "confidence": d.confidence, "x_min": d.box.x_min,
             "y_min": d.box.y_min, "x_max": d.box.x_max, "y_max": d.box.y_max}
            for d in detections
        ],
    }


def serialize_detector_predictions(predictions: Mapping[str, Iterable[Detection]]) -> str:
    return _dump_lines(detections_to_json(k, v) for k, v in predictions.items())


def write_detector_predictions(predictions: Mapping[str, Iterable[Detection]], path: str | Path) -> None:
    Path(path).write_text(serialize_detector_predictions(predictions), encoding="utf-8", newline="\n")


# -- statistics --------------------------------------------------------------

@dataclass(frozen=True)
class StatsReport:
    n_images: int
    n_studies: int
    n_normal: int
    n_abnormal: int
    label_counts: Mapping[LesionLabel, int]
    mean_width: float | None = None
    mean_height: float | None = None
    n_studies_with_age: int = 0
    age_mean: float | None = None
    age_min: int | None = None
    age_max: int | None = None
    n_studies_with_sex: int = 0
    male_pct: float | None = None
    female_pct: float | None = None
    splits: Mapping[str, "StatsReport"] = field(default_factory=dict)

    @property
    def n_boxes(self) -> int:
        return sum(self.label_counts.values())

    def to_json(self) -> dict:
        obj = {
            "n_images": self.n_images,
            "n_studies": self.n_studies,
            "n_normal": self.n_normal,
            "n_abnormal": self.n_abnormal,
            "n_boxes": self.n_boxes,
            "label_counts": {k.value: v for k, v in self.label_counts.items()},
            "mean_width": self.mean_width,
            "mean_height": self.mean_height,
            "n_studies_with_age": self.n_studies_with_age,
            "age_mean": self.age_mean,
            "age_min": self.age_min,
            "age_max": self.age_max,
            "n_studies_with_sex": self.n_studies_with_sex,
            "male_pct": self.male_pct,
            "female_pct": self.female_pct,
        }
        if self.splits:
            obj["splits"] = {k: v.to_json() for k, v in self.splits.items()}
        return obj


def compute_stats(gt: GroundTruthSet) -> StatsReport:
    """Exact image, study, normal/abnormal and per-label box counts.

    Age and sex are summarized per study, over studies that carry them; a
    study takes the first value found among its images in file order.
    """
    counts = {label: 0 for label in ABNORMAL_LABELS}
    n_abnormal = 0
    study_age: dict[str, int] = {}
    study_sex: dict[str, str] = {}
    for record in gt:
        if record.abnormal:
            n_abnormal += 1
        for box in record.boxes:
            counts[box.label] += 1
        if record.age is not None:
            study_age.setdefault(record.study_id, record.age)
        if record.sex is not None:
            study_sex.setdefault(record.study_id, record.sex)

    n = len(gt)
    widths = [r.width for r in gt]
    heights = [r.height for r in gt]
    ages = list(study_age.values())
    sexes = list(study_sex.values())
    return StatsReport(
        n_images=n,
        n_studies=len(gt.studies),
        n_normal=n - n_abnormal,
        n_abnormal=n_abnormal,
        label_counts=counts,
        mean_width=math.fsum(widths) / n if n else None,
        mean_height=math.fsum(heights) / n if n else None,
        n_studies_with_age=len(ages),
        age_mean=math.fsum(ages) / len(ages) if ages else None,
        age_min=min(ages) if ages else None,
        age_max=max(ages) if ages else None,
        n_studies_with_sex=len(sexes),
        male_pct=100.0 * sexes.count("M") / len(sexes) if sexes else None,
        female_pct=100.0 * sexes.count("F") / len(sexes) if sexes else None,
    )


def merge_ground_truth(parts: Iterable[GroundTruthSet]) -> GroundTruthSet:
    records: dict[str, ImageRecord] = {}
    for gt in parts:
        for record in gt:
            if record.image_id in records:
                raise DuplicateImageId(record.image_id)
            records[record.image_id] = record
    return GroundTruthSet(records)


def compute_split_stats(parts: Mapping[str, GroundTruthSet]) -> StatsReport:
    """Totals over the union of ``parts`` with a per-part breakdown."""
    total = compute_stats(merge_ground_truth(parts.values()))
    splits = {name: compute_stats(gt) for name, gt in parts.items()}
    return StatsReport(**{**total.__dict__, "splits": splits})


# -- stratified split --------------------------------------------------------

Stratum = Callable[[str, list[ImageRecord]], Hashable]


def study_abnormal(study_id: str, records: list[ImageRecord]) -> bool:
    """Default stratum: a study is abnormal if any of its images is."""
    return any(r.abnormal for r in records)


@dataclass(frozen=True)
class SplitAssignment:
    assignment: Mapping[str, str]
    seed: int
    train_fraction: float

    def studies(self, split: str) -> list[str]:
        return sorted(k for k, v in self.assignment.items() if v == split)

    def image_subset(self, gt: GroundTruthSet, split: str) -> GroundTruthSet:
        return GroundTruthSet({k: r for k, r in gt.records.items()
                               if self.assignment.get(r.study_id) == split})


def _fisher_yates(items: list[str], rng: np.random.Generator) -> list[str]:
    items = list(items)
    for i in range(len(items) - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        items[i], items[j] = items[j], items[i]
    return items


def _allocate(sizes: list[int], total: int) -> list[int]:
    # Largest-remainder apportionment of `total` proportional to `sizes`.
    n = sum(sizes)
    quotas = [Fraction(s * total, n) for s in sizes]
    alloc = [math.floor(q) for q in quotas]
    order = sorted(range(len(sizes)), key=lambda i: (-(quotas[i] - alloc[i]), i))
    for i in order[: total - sum(alloc)]:
        alloc[i] += 1
    return alloc


def stratified_split(
    gt: GroundTruthSet,
    train_fraction: float,
    seed: int = 0,
    stratum: Stratum = study_abnormal,
) -> SplitAssignment:
    """Assign whole studies to train/test, balanced across strata.

    ``floor(n_studies * train_fraction)`` studies go to train; that total is
    apportioned over strata by largest remainder, so every stratum is within
    one study of its proportional share. Within a stratum, study ids are
    sorted and then Fisher-Yates shuffled with a PCG64 stream seeded by
    ``(seed, stratum index)``, so the result ignores input order.
    """
    if isinstance(train_fraction, bool) or not (0.0 < train_fraction <= 1.0):
        raise InvalidFraction(f"train fraction must be in (0, 1], got {train_fraction}")
    if seed < 0:
        raise InputError(f"seed must be unsigned, got {seed}")
    if not gt.studies:
        raise EmptyDataset("no studies to split")

    by_study: dict[str, list[ImageRecord]] = {}
    for record in gt:
        by_study.setdefault(record.study_id, []).append(record)

    strata: dict[Hashable, list[str]] = {}
    for study_id in sorted(by_study):
        strata.setdefault(stratum(study_id, by_study[study_id]), []).append(study_id)
    keys = sorted(strata, key=repr)

    n = len(by_study)
    frac = Fraction(train_fraction).limit_denominator(10**9)
    n_train = math.floor(n * frac)
    alloc = _allocate([len(strata[k]) for k in keys], n_train)

    assignment: dict[str, str] = {}
    for index, (key, k_train) in enumerate(zip(keys, alloc)):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))
        shuffled = _fisher_yates(strata[key], rng)
        for pos, study_id in enumerate(shuffled):
            assignment[study_id] = TRAIN if pos < k_train else TEST
    return SplitAssignment(dict(sorted(assignment.items())), seed, train_fraction)


def serialize_split(split: SplitAssignment) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["study_id", "split"])
    for study_id in sorted(split.assignment):
        writer.writerow([study_id, split.assignment[study_id]])
    return buf.getvalue()


def parse_split(path: str | Path) -> dict[str, str]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["study_id", "split"]:
            raise InputError(f"{path}: expected header 'study_id,split'")
        out = {}
        for lineno, row in enumerate(reader, start=2):
            if row["study_id"] in out:
                raise InputError(f"duplicate study_id {row['study_id']!r}", lineno)
            out[row["study_id"]] = row["split"]
        return out
