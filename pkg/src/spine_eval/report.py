"""Tabular rendering of results as CSV, Markdown or JSON.

Human-readable formats show percentages with two decimals; JSON keeps raw
fractions and is written with sorted keys so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .core import ABNORMAL_LABELS, DETECTION_LABELS
from .dataset_io import StatsReport
from .detection import DetectionReport
from .resampling import BootstrapEstimate

FORMATS = ("csv", "markdown", "json")
MISSING = "-"


@dataclass
class Table:
    headers: list[str]
    rows: list[list[str]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.headers)
        writer.writerows(self.rows)
        return buf.getvalue()

    def to_markdown(self) -> str:
        widths = [max(len(h), *(len(r[i]) for r in self.rows)) if self.rows else len(h)
                  for i, h in enumerate(self.headers)]

        def line(cells):
            return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"

        out = [line(self.headers), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
        out.extend(line(r) for r in self.rows)
        return "\n".join(out) + "\n"


def to_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def pct(value: float | None) -> str:
    return MISSING if value is None else f"{100 * value:.2f}"


def _num(value: float | None, fmt: str = "{:.2f}") -> str:
    return MISSING if value is None else fmt.format(value)


# -- dataset statistics ------------------------------------------------------

def stats_table(report: StatsReport) -> Table:
    columns = list(report.splits.values()) + [report] if report.splits else [report]
    headers = ["Characteristic"] + (list(report.splits) + ["Total"] if report.splits else ["Total"])

    def size(r: StatsReport) -> str:
        if r.mean_width is None:
            return MISSING
        return f"{r.mean_width:.0f} x {r.mean_height:.0f}"

    def age(r: StatsReport) -> str:
        if r.age_mean is None:
            return MISSING
        return f"{r.age_mean:.0f} [{r.age_min} - {r.age_max}]"

    rows = [
        ["Number of studies"] + [str(r.n_studies) for r in columns],
        ["Number of images"] + [str(r.n_images) for r in columns],
        ["Number of normal images"] + [str(r.n_normal) for r in columns],
        ["Number of abnormal images"] + [str(r.n_abnormal) for r in columns],
        ["Image size (pixel x pixel, mean)"] + [size(r) for r in columns],
        ["Age (mean, years [range])"] + [age(r) for r in columns],
        ["Male (%)"] + [_num(r.male_pct) for r in columns],
        ["Female (%)"] + [_num(r.female_pct) for r in columns],
    ]
    for i, label in enumerate(ABNORMAL_LABELS, start=1):
        rows.append([f"{i}. {label.value}"] + [str(r.label_counts[label]) for r in columns])
    return Table(headers, rows)


def stats_json(report: StatsReport) -> dict:
    return report.to_json()


# -- classification ----------------------------------------------------------

CLS_METRICS = (("auroc", "AUROC"), ("f1", "F1 score"),
               ("sensitivity", "Sensitivity"), ("specificity", "Specificity"))


@dataclass
class ClassifierRow:
    name: str
    cutoff: float
    youden: float
    estimates: Mapping[str, BootstrapEstimate]
    counts: Mapping[str, int]


def classification_table(rows: Sequence[ClassifierRow], delimited: bool = False) -> Table:
    """One row per model. ``delimited`` splits each CI into its own columns."""
    headers = ["Classifier", "Cutoff"]
    for _, title in CLS_METRICS:
        headers += [title, f"{title} CI low", f"{title} CI high"] if delimited else [title]
    body = []
    for row in rows:
        cells = [row.name, f"{row.cutoff:.4f}"]
        for key, _ in CLS_METRICS:
            e = row.estimates[key]
            if delimited:
                cells += [pct(e.point), pct(e.ci_low), pct(e.ci_high)]
            else:
                cells.append(f"{pct(e.point)} ({pct(e.ci_low)}, {pct(e.ci_high)})")
        body.append(cells)
    return Table(headers, body)


def classification_json(rows: Sequence[ClassifierRow], meta: Mapping[str, Any]) -> dict:
    return {
        **meta,
        "models": [
            {
                "name": row.name,
                "cutoff": row.cutoff,
                "youden": row.youden,
                "counts": dict(row.counts),
                **{key: {"point": e.point, "ci_low": e.ci_low, "ci_high": e.ci_high,
                         "n_skipped": e.n_skipped}
                   for key, e in ((k, row.estimates[k]) for k, _ in CLS_METRICS)},
            }
            for row in rows
        ],
    }


# -- detection ---------------------------------------------------------------

def detection_table(reports: Mapping[str, DetectionReport]) -> Table:
    headers = ["Detector"] + [label.code for label in DETECTION_LABELS] + ["mAP@0.5"]
    rows = [[name] + [pct(r.ap[label]) for label in DETECTION_LABELS] + [pct(r.map)]
            for name, r in reports.items()]
    return Table(headers, rows)


def detection_json(reports: Mapping[str, DetectionReport]) -> dict:
    return {
        name: {
            "iou_threshold": r.iou_threshold,
            "map": r.map,
            "classes": {
                label.code: {"label": label.value, "ap": r.ap[label],
                             "n_gt": r.n_gt[label], "n_pred": r.n_pred[label]}
                for label in DETECTION_LABELS
            },
        }
        for name, r in reports.items()
    }


def render(table: Table, fmt: str, json_obj: Any = None) -> str:
    if fmt == "csv":
        return table.to_csv()
    if fmt == "markdown":
        return table.to_markdown()
    if fmt == "json":
        return to_json(json_obj)
    raise ValueError(f"unknown format {fmt!r}")
