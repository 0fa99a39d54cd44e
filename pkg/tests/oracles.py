"""Brute-force reference implementations used to check the fast paths.

Nothing here imports the metric code under test; everything is plain Python,
with exact rational arithmetic where rounding could matter.
"""

from __future__ import annotations

from fractions import Fraction


def concordance_auroc(labels, scores) -> float:
    """P(score_pos > score_neg) + 1/2 P(tie), by counting every pair."""
    pos = [s for y, s in zip(labels, scores) if y == 1]
    neg = [s for y, s in zip(labels, scores) if y == 0]
    total = Fraction(0)
    for p in pos:
        for n in neg:
            if p > n:
                total += 1
            elif p == n:
                total += Fraction(1, 2)
    return float(total / (len(pos) * len(neg)))


def exhaustive_youden(labels, scores) -> tuple[float, float]:
    """(max J, smallest cutoff attaining it) over observed scores and +inf."""
    n_pos = sum(1 for y in labels if y == 1)
    n_neg = len(labels) - n_pos
    best_j, best_c = None, None
    for c in sorted(set(scores)) + [float("inf")]:
        tp = sum(1 for y, s in zip(labels, scores) if y == 1 and s >= c)
        tn = sum(1 for y, s in zip(labels, scores) if y == 0 and s < c)
        j = tp / n_pos + tn / n_neg - 1
        if best_j is None or j > best_j:
            best_j, best_c = j, c
    return best_j, best_c


def exact_iou(a, b) -> Fraction:
    """IoU of (x0, y0, x1, y1) tuples as an exact fraction."""
    ax0, ay0, ax1, ay1 = map(Fraction, a)
    bx0, by0, bx1, by1 = map(Fraction, b)
    w = min(ax1, bx1) - max(ax0, bx0)
    h = min(ay1, by1) - max(ay0, by0)
    inter = w * h if w > 0 and h > 0 else Fraction(0)
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union


def greedy_flags(gts, preds, threshold=Fraction(1, 2)) -> list[bool]:
    """TP flag per prediction (input order).

    ``gts``: list of box tuples. ``preds``: list of (confidence, box tuple).
    Highest confidence first, earlier input first on ties; each takes the
    unmatched ground truth of highest IoU (lowest index on ties) if >= threshold.
    """
    order = sorted(range(len(preds)), key=lambda i: (-preds[i][0], i))
    used = [False] * len(gts)
    flags = [False] * len(preds)
    for i in order:
        best, best_j = None, None
        for j, g in enumerate(gts):
            if used[j]:
                continue
            v = exact_iou(preds[i][1], g)
            if best is None or v > best:
                best, best_j = v, j
        if best is not None and best >= threshold:
            used[best_j] = True
            flags[i] = True
    return flags


def ap_from_outcomes(outcomes, n_gt) -> float:
    """101-point interpolated AP from confidence-sorted TP/FP outcomes.

    For each level k/100 the precision is the best precision over all prefix
    points whose recall tp/n_gt is at least k/100.
    """
    points = []
    tp = fp = 0
    for hit in outcomes:
        tp += hit
        fp += not hit
        points.append((Fraction(tp, n_gt), Fraction(tp, tp + fp)))
    total = Fraction(0)
    for k in range(101):
        level = Fraction(k, 100)
        candidates = [p for r, p in points if r >= level]
        total += max(candidates) if candidates else 0
    return float(total / 101)


def brute_map(instance, threshold=Fraction(1, 2)):
    """Per-class AP and mAP for a plain-data instance.

    ``instance``: list of images, each ``{"gts": [(cls, box)], "preds": [(cls, conf, box)]}``.
    Pooled order: confidence descending, then (image index, position).
    Returns ({cls: ap or None}, map or None).
    """
    classes = sorted({c for im in instance for c, _ in im["gts"]}
                     | {c for im in instance for c, _, _ in im["preds"]})
    aps = {}
    for cls in classes:
        n_gt = 0
        pooled = []
        seq = 0
        for im in instance:
            gts = [b for c, b in im["gts"] if c == cls]
            preds = [(conf, b) for c, conf, b in im["preds"] if c == cls]
            n_gt += len(gts)
            for (conf, _), hit in zip(preds, greedy_flags(gts, preds, threshold)):
                pooled.append((conf, seq, hit))
                seq += 1
        if n_gt == 0:
            aps[cls] = None
            continue
        pooled.sort(key=lambda t: (-t[0], t[1]))
        aps[cls] = ap_from_outcomes([h for _, _, h in pooled], n_gt)
    defined = [v for v in aps.values() if v is not None]
    return aps, (sum(defined) / len(defined) if defined else None)
