"""Percentile bootstrap confidence intervals for image-level metrics."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .classification import LabeledScores
from .errors import AllResamplesDegenerate, EmptyData, InputError, UndefinedMetric

Metric = Callable[[LabeledScores], float]


@dataclass(frozen=True)
class BootstrapEstimate:
    point: float
    ci_low: float
    ci_high: float
    n_resamples: int
    alpha: float
    seed: int
    n_skipped: int = 0


def resample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent PCG64 stream for one resample, fixed by ``(seed, index)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def _group_index(data: LabeledScores) -> list[np.ndarray]:
    if data.groups is None:
        raise InputError("study-level resampling needs study ids on the data")
    members: dict[str, list[int]] = {}
    for i, g in enumerate(data.groups):
        members.setdefault(g, []).append(i)
    return [np.array(members[g]) for g in sorted(members)]


def resample_indices(data: LabeledScores, seed: int, index: int, unit: str = "image",
                     groups: list[np.ndarray] | None = None) -> np.ndarray:
    rng = resample_rng(seed, index)
    if unit == "image":
        n = len(data)
        return rng.integers(0, n, size=n)
    if unit == "study":
        groups = groups if groups is not None else _group_index(data)
        picks = rng.integers(0, len(groups), size=len(groups))
        return np.concatenate([groups[k] for k in picks])
    raise InputError(f"unknown resampling unit {unit!r}")


def bootstrap_values(metrics: Mapping[str, Metric], data: LabeledScores, n_resamples: int,
                     seed: int, unit: str = "image", threads: int = 1) -> dict[str, np.ndarray]:
    """Value of each metric per resample, NaN where a metric is undefined.

    All metrics see the same resamples.
    """
    groups = _group_index(data) if unit == "study" else None
    names = list(metrics)

    def run(bounds: tuple[int, int]) -> np.ndarray:
        lo, hi = bounds
        out = np.empty((hi - lo, len(names)))
        for i in range(lo, hi):
            sample = data.take(resample_indices(data, seed, i, unit, groups))
            for k, name in enumerate(names):
                try:
                    out[i - lo, k] = metrics[name](sample)
                except UndefinedMetric:
                    out[i - lo, k] = np.nan
        return out

    threads = max(1, min(threads, n_resamples))
    edges = np.linspace(0, n_resamples, threads + 1).astype(int)
    chunks = list(zip(edges[:-1], edges[1:]))
    if threads == 1:
        parts = [run(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    table = np.concatenate(parts)
    return {name: table[:, k] for k, name in enumerate(names)}


def bootstrap_cis(
    metrics: Mapping[str, Metric],
    data: LabeledScores,
    n_resamples: int = 10_000,
    alpha: float = 0.05,
    seed: int = 0,
    unit: str = "image",
    threads: int = 1,
) -> dict[str, BootstrapEstimate]:
    """Percentile intervals for several metrics from one set of resamples.

    Each resample draws ``len(data)`` items with replacement (or as many
    studies, for ``unit="study"``) from its own stream seeded by
    ``(seed, resample index)``, so results do not depend on ``threads``.
    Resamples on which a metric is undefined, e.g. single-class draws for
    AUROC, are skipped for that metric and counted in ``n_skipped``.
    """
    if isinstance(n_resamples, bool) or not isinstance(n_resamples, (int, np.integer)) \
            or n_resamples < 1:
        raise InputError(f"n_resamples must be a positive integer, got {n_resamples}")
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must be in (0, 1), got {alpha}")
    if seed < 0:
        raise InputError(f"seed must be unsigned, got {seed}")
    if len(data) == 0:
        raise EmptyData("no data to resample")

    points = {name: float(fn(data)) for name, fn in metrics.items()}
    values = bootstrap_values(metrics, data, int(n_resamples), seed, unit, threads)
    out = {}
    for name, column in values.items():
        defined = column[~np.isnan(column)]
        if defined.size == 0:
            raise AllResamplesDegenerate(f"{name}: undefined on all {n_resamples} resamples")
        low, high = np.quantile(defined, [alpha / 2, 1 - alpha / 2])
        out[name] = BootstrapEstimate(points[name], float(low), float(high), int(n_resamples),
                                      alpha, seed, int(column.size - defined.size))
    return out


def bootstrap_ci(
    metric: Metric,
    data: LabeledScores,
    n_resamples: int = 10_000,
    alpha: float = 0.05,
    seed: int = 0,
    unit: str = "image",
    threads: int = 1,
) -> BootstrapEstimate:
    """Point estimate plus the ``(alpha/2, 1 - alpha/2)`` percentile interval."""
    return bootstrap_cis({"metric": metric}, data, n_resamples, alpha, seed, unit,
                         threads)["metric"]
