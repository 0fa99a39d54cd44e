import json
import random

import pytest
from conftest import synthetic_gt, write_jsonl
from hypothesis import given, settings
from hypothesis import strategies as st

from spine_eval.core import GroundTruthSet, ImageRecord, LesionLabel
from spine_eval.dataset_io import (
    TEST,
    TRAIN,
    compute_split_stats,
    compute_stats,
    parse_annotations,
    parse_classifier_predictions,
    parse_detector_predictions,
    serialize_annotations,
    serialize_classifier_predictions,
    serialize_detector_predictions,
    serialize_split,
    stratified_split,
    study_abnormal,
)
from spine_eval.errors import (
    ConfidenceOutOfRange,
    DuplicateImageId,
    EmptyDataset,
    InvalidBox,
    InvalidFraction,
    MalformedJson,
    ScoreOutOfRange,
    UnknownLabel,
)

L = LesionLabel


def gt_line(image_id, study_id="s1", boxes=(), **extra):
    return {"image_id": image_id, "study_id": study_id, "width": 100, "height": 80,
            "boxes": list(boxes), **extra}


def gt_box(label="Osteophytes", x0=1, y0=2, x1=10, y1=20):
    return {"label": label, "x_min": x0, "y_min": y0, "x_max": x1, "y_max": y1}


# -- annotations -------------------------------------------------------------

def test_parse_two_records(tmp_path):
    path = write_jsonl(tmp_path / "gt.jsonl", [gt_line("a", boxes=[gt_box()]), gt_line("b")])
    gt = parse_annotations(path)
    assert len(gt) == 2
    assert gt.records["a"].abnormal and not gt.records["b"].abnormal


def test_parse_inverted_box_reports_line(tmp_path):
    path = write_jsonl(tmp_path / "gt.jsonl", [gt_line("a"), gt_line("b", boxes=[gt_box(x0=10, x1=5)])])
    with pytest.raises(InvalidBox) as err:
        parse_annotations(path)
    assert err.value.line == 2
    assert "line 2" in str(err.value)


def test_parse_malformed_and_duplicates(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"image_id": "a"\n', encoding="utf-8")
    with pytest.raises(MalformedJson) as err:
        parse_annotations(bad)
    assert err.value.line == 1
    dup = write_jsonl(tmp_path / "dup.jsonl", [gt_line("a"), gt_line("a")])
    with pytest.raises(DuplicateImageId) as err:
        parse_annotations(dup)
    assert err.value.line == 2
    missing = write_jsonl(tmp_path / "m.jsonl", [{"image_id": "a"}])
    with pytest.raises(MalformedJson, match="study_id"):
        parse_annotations(missing)


def test_parse_unknown_label_in_annotations(tmp_path):
    path = write_jsonl(tmp_path / "gt.jsonl", [gt_line("a", boxes=[gt_box("Osteophyte")])])
    with pytest.raises(UnknownLabel):
        parse_annotations(path)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        parse_annotations("/nonexistent/gt.jsonl")


def test_annotation_round_trip(tmp_path):
    lines = [gt_line("a", boxes=[gt_box(), gt_box("fracture", 0.5, 0.5, 99.5, 79.0)], age=40, sex="F"),
             gt_line("b", "s2")]
    path = write_jsonl(tmp_path / "gt.jsonl", lines)
    gt = parse_annotations(path)
    text = serialize_annotations(gt)
    # byte-equivalent modulo key order and label canonicalization
    reparsed = [json.loads(t) for t in text.splitlines()]
    lines[0]["boxes"][1]["label"] = "Fracture"
    assert reparsed == lines
    again = tmp_path / "again.jsonl"
    again.write_text(text, encoding="utf-8")
    assert parse_annotations(again) == gt


def test_round_trip_synthetic(tmp_path):
    gt = synthetic_gt(40, seed=3)
    path = tmp_path / "gt.jsonl"
    path.write_text(serialize_annotations(gt), encoding="utf-8")
    assert parse_annotations(path) == gt


# -- predictions -------------------------------------------------------------

def test_classifier_predictions(tmp_path):
    ok = write_jsonl(tmp_path / "c.jsonl", [{"image_id": "a", "score": 0.5}])
    assert parse_classifier_predictions(ok) == {"a": 0.5}
    high = write_jsonl(tmp_path / "h.jsonl", [{"image_id": "a", "score": 1.2}])
    with pytest.raises(ScoreOutOfRange):
        parse_classifier_predictions(high)
    dup = write_jsonl(tmp_path / "d.jsonl", [{"image_id": "a", "score": 0.1}, {"image_id": "a", "score": 0.2}])
    with pytest.raises(DuplicateImageId):
        parse_classifier_predictions(dup)


def det_line(image_id, *dets):
    return {"image_id": image_id, "detections": list(dets)}


def det_entry(label="Osteophytes", conf=0.9, x0=0, y0=0, x1=10, y1=10):
    return {"label": label, "confidence": conf, "x_min": x0, "y_min": y0, "x_max": x1, "y_max": y1}


def test_detector_predictions(tmp_path):
    path = write_jsonl(tmp_path / "d.jsonl", [det_line("a", det_entry(), det_entry("Surgical implant", 0.3))])
    preds = parse_detector_predictions(path)
    assert list(preds) == ["a"] and len(preds["a"]) == 2
    assert preds["a"][1].label is L.SURGICAL_IMPLANT


def test_detector_rejects_non_target_label(tmp_path):
    path = write_jsonl(tmp_path / "d.jsonl", [det_line("a", det_entry("Fracture"))])
    with pytest.raises(UnknownLabel) as err:
        parse_detector_predictions(path)
    assert err.value.line == 1


def test_detector_confidence_and_empty(tmp_path):
    path = write_jsonl(tmp_path / "d.jsonl", [det_line("a", det_entry(conf=1.5))])
    with pytest.raises(ConfidenceOutOfRange):
        parse_detector_predictions(path)
    empty = tmp_path / "e.jsonl"
    empty.write_text("", encoding="utf-8")
    assert parse_detector_predictions(empty) == {}


def test_prediction_round_trips(tmp_path):
    path = write_jsonl(tmp_path / "d.jsonl", [det_line("a", det_entry(), det_entry(conf=0.25)), det_line("b")])
    preds = parse_detector_predictions(path)
    out = tmp_path / "o.jsonl"
    out.write_text(serialize_detector_predictions(preds), encoding="utf-8")
    assert parse_detector_predictions(out) == preds
    scores = {"x": 0.125, "y": 1.0}
    out.write_text(serialize_classifier_predictions(scores), encoding="utf-8")
    assert parse_classifier_predictions(out) == scores


# -- statistics --------------------------------------------------------------

def test_stats_counts():
    recs = [
        ImageRecord("a", "s1", 100, 100, (), age=30, sex="M"),
        ImageRecord("b", "s1", 200, 100, ()),
        ImageRecord("c", "s2", 100, 300, ()),
    ]
    from spine_eval.core import BoundingBox

    recs.append(ImageRecord("d", "s3", 100, 100, (BoundingBox(0, 0, 5, 5, L.OSTEOPHYTES),
                                                   BoundingBox(0, 0, 5, 5, L.OSTEOPHYTES),
                                                   BoundingBox(1, 1, 5, 5, L.FRACTURE)), age=50, sex="F"))
    s = compute_stats(GroundTruthSet.from_records(recs))
    assert (s.n_images, s.n_studies, s.n_normal, s.n_abnormal) == (4, 3, 3, 1)
    assert s.label_counts[L.OSTEOPHYTES] == 2 and s.label_counts[L.FRACTURE] == 1
    assert s.n_boxes == 3
    assert s.mean_width == 125.0
    assert (s.age_mean, s.age_min, s.age_max) == (40.0, 30, 50)
    assert s.male_pct == 50.0


def test_stats_empty():
    s = compute_stats(GroundTruthSet({}))
    assert (s.n_images, s.n_studies, s.n_normal, s.n_abnormal, s.n_boxes) == (0, 0, 0, 0, 0)
    assert all(v == 0 for v in s.label_counts.values())


def test_stats_totals_partition():
    gt = synthetic_gt(60, seed=5)
    s = compute_stats(gt)
    assert s.n_normal + s.n_abnormal == s.n_images
    assert sum(len(v) for v in gt.studies.values()) == s.n_images
    assert sum(s.label_counts.values()) == sum(len(r.boxes) for r in gt)


def test_split_stats_totals_equal_sum_of_parts():
    gt = synthetic_gt(50, seed=1)
    split = stratified_split(gt, 0.8, seed=1)
    report = compute_split_stats({TRAIN: split.image_subset(gt, TRAIN), TEST: split.image_subset(gt, TEST)})
    parts = list(report.splits.values())
    assert report.n_images == sum(p.n_images for p in parts)
    for label, count in report.label_counts.items():
        assert count == sum(p.label_counts[label] for p in parts)


# -- split -------------------------------------------------------------------

def abnormal_studies(gt):
    return {s for s, ids in gt.studies.items() if any(gt.records[i].abnormal for i in ids)}


def test_split_sizes_and_fraction_one():
    gt = synthetic_gt(50, seed=2)
    split = stratified_split(gt, 1.0, seed=0)
    assert split.studies(TEST) == []
    assert len(split.studies(TRAIN)) == 50


def test_split_errors():
    gt = synthetic_gt(5)
    for bad in (0.0, 1.5, -0.1):
        with pytest.raises(InvalidFraction):
            stratified_split(gt, bad)
    with pytest.raises(EmptyDataset):
        stratified_split(GroundTruthSet({}), 0.5)


def test_split_ignores_input_order():
    gt = synthetic_gt(80, seed=4)
    records = list(gt)
    random.Random(9).shuffle(records)
    shuffled = GroundTruthSet.from_records(records)
    a = stratified_split(gt, 0.7, seed=11)
    b = stratified_split(shuffled, 0.7, seed=11)
    assert serialize_split(a) == serialize_split(b)
    assert stratified_split(gt, 0.7, seed=12).assignment != a.assignment


def test_split_custom_stratum():
    gt = synthetic_gt(30, seed=6)
    split = stratified_split(gt, 0.5, seed=0, stratum=lambda sid, recs: len(recs))
    assert set(split.assignment) == set(gt.studies)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 120), rate=st.floats(0, 1), fraction=st.floats(0.01, 1.0),
       seed=st.integers(0, 2**32))
def test_split_partition_and_balance(n, rate, fraction, seed):
    gt = synthetic_gt(n, abnormal_rate=rate, seed=seed % 1000)
    split = stratified_split(gt, fraction, seed=seed)
    train, test = set(split.studies(TRAIN)), set(split.studies(TEST))
    assert train | test == set(gt.studies) and not train & test
    abn = abnormal_studies(gt)
    n_abn = len(abn)
    # each stratum within one study of its proportional share
    assert abs(len(train & abn) - n_abn * len(train) / n) < 1
    assert abs(len(test & abn) - n_abn * len(test) / n) < 1
    if train:
        assert abs(len(train & abn) / len(train) - n_abn / n) <= 1 / len(train)


def test_study_abnormal_default():
    recs = [ImageRecord("a", "s", 10, 10)]
    assert study_abnormal("s", recs) is False
