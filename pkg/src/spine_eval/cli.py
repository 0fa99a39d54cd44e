"""``spine-eval`` command line.

Exit codes: 0 success, 1 internal error, 2 bad input.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .classification import (
    LabeledScores,
    align_scores,
    auroc,
    confusion_at,
    ensemble_average,
    roc_curve,
    youden_optimal,
)
from .core import GroundTruthSet, OperatingPoint
from .dataset_io import (
    TEST,
    TRAIN,
    compute_split_stats,
    compute_stats,
    parse_annotations,
    parse_classifier_predictions,
    parse_detector_predictions,
    parse_split,
    serialize_classifier_predictions,
    serialize_detector_predictions,
    serialize_split,
    stratified_split,
)
from .detection import mean_ap
from .errors import InputError, UnknownImage
from .fusion import BOOST, GATE, FusionConfig, fuse_dataset
from .report import (
    ClassifierRow,
    classification_json,
    classification_table,
    detection_json,
    detection_table,
    render,
    stats_json,
    stats_table,
)
from .resampling import bootstrap_cis

log = logging.getLogger("spine_eval")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _cutoff(text: str) -> float | str:
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}") from None


def _fraction(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _unsigned(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "markdown", "json"), default="markdown")
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    common.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1,
                        help="worker threads; results do not depend on it")
    common.add_argument("--figures", type=Path, metavar="DIR",
                        help="also render report figures into DIR")
    common.add_argument("--strict", action=argparse.BooleanOptionalAction, default=True,
                        help="abort on predicted images missing from annotations "
                             "(default); --no-strict ignores them with a warning")

    parser = _Parser(prog="spine-eval", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", parents=[common], help="dataset statistics table")
    p.add_argument("--annotations", action="append", required=True, metavar="[NAME=]PATH",
                   help="annotation JSONL; repeat for one column per file")
    p.add_argument("--split", type=Path, help="study_id,split CSV to break one file into splits")

    p = sub.add_parser("split", parents=[common], help="study-level stratified split")
    p.add_argument("--annotations", type=Path, required=True)
    p.add_argument("--fraction", type=_fraction, required=True, help="train fraction in (0, 1]")
    p.add_argument("--seed", type=_unsigned, default=0)

    p = sub.add_parser("eval-cls", parents=[common], help="classification report")
    p.add_argument("--annotations", type=Path, required=True)
    p.add_argument("--preds", type=Path, action="append", required=True,
                   help="classifier JSONL; repeat to ensemble several models")
    p.add_argument("--cutoff", type=_cutoff, default="auto",
                   help="decision cutoff, or 'auto' for the Youden-optimal one on this data")
    p.add_argument("--bootstrap", type=_positive_int, default=10_000)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=_unsigned, default=0)
    p.add_argument("--resample-unit", choices=("image", "study"), default="image")

    p = sub.add_parser("eval-det", parents=[common], help="detection report")
    p.add_argument("--annotations", type=Path, required=True)
    p.add_argument("--det-preds", action="append", required=True, metavar="[NAME=]PATH",
                   help="detector JSONL; repeat for one row per file")
    p.add_argument("--iou", type=float, default=0.5)

    p = sub.add_parser("fuse", parents=[common], help="fuse classifier and detector outputs")
    p.add_argument("--cls-preds", type=Path, required=True)
    p.add_argument("--det-preds", type=Path, required=True)
    p.add_argument("--cutoff", type=_cutoff, required=True,
                   help="classifier cutoff; 'auto' needs --annotations")
    p.add_argument("--annotations", type=Path, help="ground truth for --cutoff auto")
    p.add_argument("--floor", type=float, default=0.5)
    p.add_argument("--direction", choices=(GATE, BOOST), default=GATE)
    return parser


def _named(arg: str) -> tuple[str, Path]:
    name, sep, path = arg.partition("=")
    if sep and name and not Path(arg).exists():
        return name, Path(path)
    return Path(arg).stem, Path(arg)


def _unique(names: list[str]) -> list[str]:
    seen: dict[str, int] = {}
    out = []
    for name in names:
        seen[name] = seen.get(name, 0) + 1
        out.append(name if seen[name] == 1 else f"{name}#{seen[name]}")
    return out


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8", newline="\n")


def _delimited(fmt: str) -> bool:
    return fmt == "csv"


# -- subcommands -------------------------------------------------------------

def cmd_stats(args) -> int:
    files = [_named(s) for s in args.annotations]
    if args.split is not None:
        if len(files) != 1:
            raise InputError("--split takes exactly one --annotations file")
        gt = parse_annotations(files[0][1])
        assignment = parse_split(args.split)
        missing = sorted(set(gt.studies) - set(assignment))
        if missing:
            raise InputError(f"study {missing[0]!r} has no split assignment")
        parts: dict[str, GroundTruthSet] = {}
        for name in sorted(set(assignment.values()), key=lambda s: (s != TRAIN, s != TEST, s)):
            parts[name] = GroundTruthSet({k: r for k, r in gt.records.items()
                                          if assignment[r.study_id] == name})
        report = compute_split_stats(parts)
    elif len(files) > 1:
        names = _unique([n for n, _ in files])
        report = compute_split_stats({n: parse_annotations(p) for n, (_, p) in zip(names, files)})
    else:
        report = compute_stats(parse_annotations(files[0][1]))
    _emit(render(stats_table(report), args.format, stats_json(report)), args.out)
    if args.figures:
        from .plotting import plot_label_counts

        plot_label_counts(report, args.figures / "label_counts.png")
    return EXIT_OK


def cmd_split(args) -> int:
    gt = parse_annotations(args.annotations)
    split = stratified_split(gt, args.fraction, args.seed)
    _emit(serialize_split(split), args.out)

    train, test = split.studies(TRAIN), split.studies(TEST)
    abnormal = {s for s in gt.studies if any(gt.records[i].abnormal for i in gt.studies[s])}

    def frac(studies):
        return sum(s in abnormal for s in studies) / len(studies) if studies else float("nan")

    print(f"studies: {len(gt.studies)} total, {len(train)} train, {len(test)} test (seed {args.seed})",
          file=sys.stderr)
    print(f"abnormal study fraction: all {frac(list(gt.studies)):.4f}, "
          f"train {frac(train):.4f}, test {frac(test):.4f}", file=sys.stderr)
    return EXIT_OK


def _classifier_row(name: str, data: LabeledScores, cutoff, args) -> tuple[ClassifierRow, OperatingPoint | None]:
    point = None
    if cutoff == "auto":
        point = youden_optimal(data)
        cutoff = point.cutoff
    c = float(cutoff)
    metrics = {
        "auroc": auroc,
        "f1": lambda d: confusion_at(d, c).f1,
        "sensitivity": lambda d: confusion_at(d, c).sensitivity,
        "specificity": lambda d: confusion_at(d, c).specificity,
    }
    estimates = bootstrap_cis(metrics, data, args.bootstrap, args.alpha, args.seed,
                              args.resample_unit, args.threads)
    conf = confusion_at(data, c)
    counts = {"tp": conf.tp, "fp": conf.fp, "tn": conf.tn, "fn": conf.fn}
    return ClassifierRow(name, c, conf.youden, estimates, counts), point


def cmd_eval_cls(args) -> int:
    gt = parse_annotations(args.annotations)
    names = _unique([p.stem for p in args.preds])
    models = [parse_classifier_predictions(p) for p in args.preds]
    if len(models) > 1:
        names.append("Ensemble")
        models.append(ensemble_average(models))

    rows, curves, points, aurocs = [], {}, {}, {}
    for name, scores in zip(names, models):
        data = align_scores(gt, scores, strict=args.strict)
        row, point = _classifier_row(name, data, args.cutoff, args)
        rows.append(row)
        if point is not None:
            print(f"{name}: c* = {point.cutoff:.4f} (J = {point.youden:.4f}, "
                  f"sensitivity {point.sensitivity:.4f}, specificity {point.specificity:.4f})",
                  file=sys.stderr)
        curves[name] = roc_curve(data)
        points[name] = OperatingPoint(row.cutoff, row.estimates["sensitivity"].point,
                                      row.estimates["specificity"].point, row.youden)
        aurocs[name] = row.estimates["auroc"].point

    meta = {"cutoff_mode": "auto" if args.cutoff == "auto" else "fixed",
            "n_images": len(gt), "n_resamples": args.bootstrap, "alpha": args.alpha,
            "seed": args.seed, "resample_unit": args.resample_unit}
    table = classification_table(rows, delimited=_delimited(args.format))
    _emit(render(table, args.format, classification_json(rows, meta)), args.out)
    if args.figures:
        from .plotting import plot_roc

        plot_roc(curves, args.figures / "roc.png", points, aurocs)
    return EXIT_OK


def _restrict(predictions: dict, gt: GroundTruthSet, strict: bool) -> dict:
    extra = [k for k in predictions if k not in gt.records]
    if not extra:
        return predictions
    if strict:
        raise UnknownImage(f"prediction for unannotated image {extra[0]!r} ({len(extra)} such images)")
    log.warning("ignoring %d predicted images absent from annotations", len(extra))
    return {k: v for k, v in predictions.items() if k in gt.records}


def cmd_eval_det(args) -> int:
    gt = parse_annotations(args.annotations)
    files = [_named(s) for s in args.det_preds]
    names = _unique([n for n, _ in files])
    reports = {}
    for name, (_, path) in zip(names, files):
        preds = _restrict(parse_detector_predictions(path), gt, args.strict)
        reports[name] = mean_ap(gt, preds, args.iou, threads=args.threads)
    _emit(render(detection_table(reports), args.format, detection_json(reports)), args.out)
    if args.figures:
        from .plotting import plot_pr

        for name, report in reports.items():
            plot_pr(report, args.figures / f"pr_{name}.png")
    return EXIT_OK


def cmd_fuse(args) -> int:
    cls = parse_classifier_predictions(args.cls_preds)
    det = parse_detector_predictions(args.det_preds)
    cutoff = args.cutoff
    if cutoff == "auto":
        if args.annotations is None:
            raise InputError("--cutoff auto needs --annotations")
        gt = parse_annotations(args.annotations)
        point = youden_optimal(align_scores(gt, cls, strict=args.strict))
        cutoff = point.cutoff
        print(f"c* = {cutoff:.4f} (J = {point.youden:.4f})", file=sys.stderr)
        if cutoff == float("inf"):
            raise InputError("classifier scores carry no signal: Youden optimum is the +inf sentinel")
    config = FusionConfig(float(cutoff), args.floor)
    fused = fuse_dataset(cls, det, config, args.direction)
    if args.direction == GATE:
        text = serialize_detector_predictions(fused)
    else:
        text = serialize_classifier_predictions(fused)
    _emit(text, args.out)
    return EXIT_OK


COMMANDS = {
    "stats": cmd_stats,
    "split": cmd_split,
    "eval-cls": cmd_eval_cls,
    "eval-det": cmd_eval_det,
    "fuse": cmd_fuse,
}


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (InputError, OSError) as exc:
        print(f"spine-eval {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
