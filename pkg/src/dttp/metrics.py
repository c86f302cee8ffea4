"""Hypervolume, maximum spread and end-of-interval rank aggregation.

Objective vectors are ``(tour_time, profit)`` rows: time is minimised, profit
maximised.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import pandas as pd

from .instance import TtpInstance


class IncompleteGridError(ValueError):
    """The snapshot table is missing cells of the strategy x schedule x repeat x interval grid."""


@dataclass(frozen=True)
class NadirPoint:
    tour_bound: float
    profit_bound: float = 0.0


def nadir(instance: TtpInstance) -> NadirPoint:
    """Reference point ``(mean off-diagonal distance * N, 0)`` of the base instance."""
    n = instance.n_cities
    off = instance.distance[~np.eye(n, dtype=bool)]
    return NadirPoint(float(off.mean() * n), 0.0)


def dominates(a, b) -> bool:
    return a[0] <= b[0] and a[1] >= b[1] and (a[0] < b[0] or a[1] > b[1])


def nondominated_mask(objectives) -> np.ndarray:
    """True for rows no other row dominates. Duplicate rows are all kept."""
    obj = np.asarray(objectives, dtype=float).reshape(-1, 2)
    if len(obj) == 0:
        return np.zeros(0, dtype=bool)
    # sort by time asc, profit desc: a row is dominated iff some earlier row
    # has profit >= its own and is not an exact duplicate
    order = np.lexsort((-obj[:, 1], obj[:, 0]))
    f, g = obj[order, 0], obj[order, 1]
    keep = np.zeros(len(obj), dtype=bool)
    best_g = -np.inf
    best_f = np.nan
    for k in range(len(order)):
        if g[k] > best_g:
            keep[order[k]] = True
            best_g, best_f = g[k], f[k]
        elif g[k] == best_g and f[k] == best_f:
            keep[order[k]] = True
    return keep


def hypervolume(objectives, reference: NadirPoint | tuple[float, float]) -> float:
    """Area between the non-dominated staircase and the reference point.

    Points that do not strictly dominate the reference (``f >= f_ref`` or
    ``g <= g_ref``) contribute nothing; with none left the value is 0.
    The staircase is summed exactly and rounded once, so adding points can
    never lower the result through rounding.
    """
    f_ref, g_ref = (reference.tour_bound, reference.profit_bound) if isinstance(
        reference, NadirPoint
    ) else reference
    obj = np.asarray(objectives, dtype=float).reshape(-1, 2)
    obj = obj[(obj[:, 0] < f_ref) & (obj[:, 1] > g_ref)]
    if len(obj) == 0:
        return 0.0
    front = np.unique(obj[nondominated_mask(obj)], axis=0)
    front = front[np.argsort(front[:, 0], kind="stable")]
    f_ref, prev, area = Fraction(f_ref), Fraction(g_ref), Fraction(0)
    for f, g in front.tolist():
        g = Fraction(g)
        area += (f_ref - Fraction(f)) * (g - prev)
        prev = g
    return float(area)


def max_spread(objectives) -> float:
    """Diagonal of the bounding box of the non-dominated points (unnormalised)."""
    obj = np.asarray(objectives, dtype=float).reshape(-1, 2)
    if len(obj) == 0:
        return 0.0
    front = obj[nondominated_mask(obj)]
    extent = front.max(axis=0) - front.min(axis=0)
    return float(np.hypot(extent[0], extent[1]))


SNAPSHOT_KEYS = ("strategy", "schedule", "repeat", "interval")


def rank_strategies(snapshots: pd.DataFrame, metrics=("hv", "spread")) -> pd.DataFrame:
    """Median end-of-interval rank per strategy and interval.

    ``snapshots`` needs columns strategy, schedule, repeat, interval and one
    column per metric. Values are averaged over repeats, ranked across
    strategies within each (schedule, interval) with rank 1 for the highest
    value and ties averaged, then the median rank over schedules is taken.

    Returns:
        DataFrame with columns strategy, interval, metric, median_rank.

    Raises:
        IncompleteGridError: if any grid cell is missing or duplicated.
    """
    missing = [c for c in (*SNAPSHOT_KEYS, *metrics) if c not in snapshots.columns]
    if missing:
        raise ValueError(f"snapshot table lacks columns {missing}")
    levels = [sorted(snapshots[c].unique()) for c in SNAPSHOT_KEYS]
    expected = int(np.prod([len(v) for v in levels]))
    cells = snapshots.groupby(list(SNAPSHOT_KEYS)).size()
    if len(cells) != expected or (cells != 1).any():
        raise IncompleteGridError(
            f"snapshot grid has {len(cells)} distinct cells of {expected} expected"
            + (" (duplicates present)" if (cells != 1).any() else "")
        )
    if snapshots[list(metrics)].isna().any().any():
        raise IncompleteGridError("snapshot table contains missing values")

    means = snapshots.groupby(["strategy", "schedule", "interval"], as_index=False)[list(metrics)].mean()
    out = []
    for metric in metrics:
        ranks = means.groupby(["schedule", "interval"])[metric].rank(method="average", ascending=False)
        table = means.assign(rank=ranks).groupby(["strategy", "interval"], as_index=False)["rank"].median()
        out.append(table.assign(metric=metric).rename(columns={"rank": "median_rank"}))
    result = pd.concat(out, ignore_index=True)[["strategy", "interval", "metric", "median_rank"]]
    return result.sort_values(["metric", "interval", "strategy"], kind="stable").reset_index(drop=True)
