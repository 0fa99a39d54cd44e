from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spine_eval.core import BoundingBox, Detection, GroundTruthSet, ImageRecord, LesionLabel  # noqa: E402

L = LesionLabel


def box(x0, y0, x1, y1, label=L.OSTEOPHYTES):
    return BoundingBox(x0, y0, x1, y1, label)


def det(image_id, x0, y0, x1, y1, conf, label=L.OSTEOPHYTES):
    return Detection(image_id, BoundingBox(x0, y0, x1, y1, label), conf)


def write_jsonl(path: Path, objs) -> Path:
    path.write_text("".join(json.dumps(o) + "\n" for o in objs), encoding="utf-8")
    return path


def synthetic_gt(n_studies: int, abnormal_rate: float = 0.5, seed: int = 0,
                 images_per_study: tuple[int, int] = (1, 3)) -> GroundTruthSet:
    """Random studies of 1-3 images; abnormal images carry 1-3 random boxes."""
    rng = np.random.default_rng(seed)
    records = []
    labels = list(LesionLabel)[:13]
    for s in range(n_studies):
        abnormal_study = rng.random() < abnormal_rate
        n_img = int(rng.integers(images_per_study[0], images_per_study[1] + 1))
        for k in range(n_img):
            boxes = ()
            if abnormal_study and (k == 0 or rng.random() < 0.5):
                boxes = tuple(
                    BoundingBox(float(x), float(y), float(x + w), float(y + h),
                                labels[int(rng.integers(0, 13))])
                    for x, y, w, h in rng.integers(1, 200, size=(int(rng.integers(1, 4)), 4))
                )
            records.append(ImageRecord(f"img{s:05d}_{k}", f"study{s:05d}", 512, 512, boxes))
    return GroundTruthSet.from_records(records)


# -- acceptance summary ------------------------------------------------------

_ACCEPTANCE: dict[str, tuple[int, str, str]] = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "acceptance", None)
    if marker is None:
        return
    number, title = marker
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        outcome = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        _ACCEPTANCE[report.nodeid] = (number, title, outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        outcome.get_result().acceptance = marker.args


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome in sorted(_ACCEPTANCE.values()):
        terminalreporter.write_line(f"[{outcome}] {number}. {title}")
