"""Report figures, written to files next to the tabular output.

Uses the object-oriented matplotlib API with the Agg canvas, so nothing
touches pyplot's global state.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import matplotlib as mpl
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .classification import RocCurve
from .core import ABNORMAL_LABELS, DETECTION_LABELS, LesionLabel, OperatingPoint
from .dataset_io import StatsReport
from .detection import DetectionReport, interpolated_precision, pr_curve

RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "lines.linewidth": 1.2,
}


def _figure(width: float = 4.5, height: float = 4.0) -> Figure:
    fig = Figure(figsize=(width, height), dpi=150)
    FigureCanvasAgg(fig)
    return fig


def _save(fig: Figure, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    # fixed metadata keeps PNG bytes stable across runs
    fig.savefig(path, metadata={"Software": None}, bbox_inches="tight")
    return path


def plot_roc(curves: Mapping[str, RocCurve], path: str | Path,
             points: Mapping[str, OperatingPoint] | None = None,
             aurocs: Mapping[str, float] | None = None) -> Path:
    with mpl.rc_context(RC):
        fig = _figure()
        ax = fig.add_subplot()
        ax.plot([0, 1], [0, 1], color="0.7", linestyle="--", linewidth=0.8)
        for name, curve in curves.items():
            label = name if not aurocs else f"{name} (AUROC {100 * aurocs[name]:.2f})"
            (line,) = ax.plot(curve.fpr, curve.tpr, label=label)
            if points and name in points:
                p = points[name]
                ax.plot(1 - p.specificity, p.sensitivity, "o", color=line.get_color(), markersize=4)
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.01)
        ax.set_xlabel("1 - specificity")
        ax.set_ylabel("Sensitivity")
        ax.set_title("ROC")
        ax.legend(loc="lower right")
        return _save(fig, Path(path))


def plot_pr(report: DetectionReport, path: str | Path) -> Path:
    """Interpolated precision over the 101 recall levels, one line per class."""
    grid = np.linspace(0, 1, 101)
    with mpl.rc_context(RC):
        fig = _figure(5.5, 4.0)
        ax = fig.add_subplot()
        for label in DETECTION_LABELS:
            if report.ap[label] is None:
                continue
            interp = interpolated_precision(pr_curve(report.matches[label]))
            ax.step(grid, interp, where="post",
                    label=f"{label.code} {label.value} ({100 * report.ap[label]:.2f})")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.01)
        ax.set_xlabel("Recall")
        ax.set_ylabel("Interpolated precision")
        title = "PR" if report.map is None else f"PR, mAP@{report.iou_threshold:g} = {100 * report.map:.2f}"
        ax.set_title(title)
        ax.legend(loc="upper right")
        return _save(fig, Path(path))


def plot_label_counts(report: StatsReport, path: str | Path) -> Path:
    columns: dict[str, StatsReport] = dict(report.splits) or {"Total": report}
    labels: list[LesionLabel] = list(ABNORMAL_LABELS)
    y = np.arange(len(labels))
    height = 0.8 / len(columns)
    with mpl.rc_context(RC):
        fig = _figure(6.0, 4.5)
        ax = fig.add_subplot()
        for k, (name, r) in enumerate(columns.items()):
            ax.barh(y + k * height, [r.label_counts[l] for l in labels], height, label=name)
        ax.set_yticks(y + height * (len(columns) - 1) / 2, [l.value for l in labels])
        ax.invert_yaxis()
        ax.set_xscale("symlog")
        ax.set_xlabel("Boxes")
        ax.legend(loc="lower right")
        return _save(fig, Path(path))
