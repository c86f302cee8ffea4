"""Tour and packing constructors: solver-grade, greedy and random.

Tours are 0-based city index arrays starting at 0; packings are boolean item
masks. Solver results depend only on the instance and are memoised per
instance content.
"""

from __future__ import annotations

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .instance import TtpInstance, tour_length

log = logging.getLogger(__name__)

DP_MAX_CELLS = 100_000_000
_IMPROVE_EPS = 1e-10


class ComponentMethod(str, Enum):
    SOLVER = "s"
    GREEDY = "g"
    RANDOM = "r"


class KnapsackTooLargeError(ValueError):
    """The DP table would exceed the cell budget."""


@dataclass(frozen=True, eq=False)
class Solution:
    tour: np.ndarray
    picks: np.ndarray
    tag: str = ""

    def key(self) -> bytes:
        return self.tour.tobytes() + np.packbits(self.picks).tobytes()


_memo: OrderedDict = OrderedDict()
_MEMO_SIZE = 256


def _memoised(instance: TtpInstance, name: str, fn):
    key = (instance.fingerprint(), name)
    if key in _memo:
        _memo.move_to_end(key)
        return _memo[key]
    value = fn()
    _memo[key] = value
    if len(_memo) > _MEMO_SIZE:
        _memo.popitem(last=False)
    return value


# --- tours -------------------------------------------------------------------


def greedy_tour(instance: TtpInstance) -> np.ndarray:
    """Nearest-neighbour tour from the start city; ties go to the lower index."""
    d = instance.distance
    n = instance.n_cities
    visited = np.zeros(n, dtype=bool)
    tour = np.empty(n, dtype=np.int64)
    tour[0] = 0
    visited[0] = True
    for k in range(1, n):
        row = np.where(visited, np.inf, d[tour[k - 1]])
        nxt = int(np.argmin(row))
        tour[k] = nxt
        visited[nxt] = True
    return tour


def _two_opt_pass(d: np.ndarray, tour: np.ndarray) -> bool:
    n = len(tour)
    improved = False
    for i in range(n - 2):
        a, b = tour[i], tour[i + 1]
        j = np.arange(i + 2, n)
        if i == 0:
            j = j[:-1]
        if j.size == 0:
            continue
        c = tour[j]
        e = tour[(j + 1) % n]
        delta = d[a, c] + d[b, e] - d[a, b] - d[c, e]
        hits = np.flatnonzero(delta < -_IMPROVE_EPS)
        if hits.size:
            jj = int(j[hits[0]])
            tour[i + 1 : jj + 1] = tour[i + 1 : jj + 1][::-1].copy()
            improved = True
    return improved


def _or_opt_pass(d: np.ndarray, tour: np.ndarray) -> bool:
    n = len(tour)
    improved = False
    for length in (1, 2, 3):
        s = 1
        while s + length <= n:
            if n - length < 3:
                break
            seg = tour[s : s + length].copy()
            prev, nxt = tour[s - 1], tour[(s + length) % n]
            rest = np.concatenate([tour[:s], tour[s + length :]])
            removal_gain = d[prev, seg[0]] + d[seg[-1], nxt] - d[prev, nxt]
            # insert between rest[p] and rest[p+1]
            p = np.arange(len(rest))
            u, v = rest[p], rest[(p + 1) % len(rest)]
            fwd = d[u, seg[0]] + d[seg[-1], v] - d[u, v]
            rev = d[u, seg[-1]] + d[seg[0], v] - d[u, v]
            cost = np.minimum(fwd, rev) if length > 1 else fwd
            cost[s - 1] = np.inf  # original position
            delta = cost - removal_gain
            hits = np.flatnonzero(delta < -_IMPROVE_EPS)
            if hits.size:
                q = int(hits[0])
                piece = seg if (length == 1 or fwd[q] <= rev[q]) else seg[::-1]
                tour[:] = np.concatenate([rest[: q + 1], piece, rest[q + 1 :]])
                improved = True
            s += 1
    return improved


def improve_tour(distance: np.ndarray, tour, budget: int = 1000) -> np.ndarray:
    """First-improvement 2-opt and Or-opt (segments of 1-3) until a local optimum.

    ``budget`` caps the number of full passes over both neighbourhoods. The
    first city stays in place.
    """
    tour = np.array(tour, dtype=np.int64)
    if len(tour) < 4:
        return tour
    for _ in range(budget):
        changed = _two_opt_pass(distance, tour)
        changed |= _or_opt_pass(distance, tour)
        if not changed:
            break
    return tour


def solver_tour(instance: TtpInstance, budget: int = 1000) -> np.ndarray:
    """Greedy tour refined by :func:`improve_tour`; never longer than the greedy one."""

    def build():
        seed = greedy_tour(instance)
        best = improve_tour(instance.distance, seed, budget)
        if tour_length(instance.distance, best) > tour_length(instance.distance, seed):
            best = seed
        best.setflags(write=False)
        return best

    return _memoised(instance, f"solver_tour:{budget}", build).copy()


def random_tour(instance: TtpInstance, rng: np.random.Generator) -> np.ndarray:
    return np.concatenate([[0], 1 + rng.permutation(instance.n_cities - 1)]).astype(np.int64)


# --- packings ------------------------------------------------------------------


def _weight_scale(weights: np.ndarray) -> int:
    for k in range(7):
        scaled = weights * 10**k
        if np.allclose(scaled, np.rint(scaled), rtol=0, atol=1e-9):
            return 10**k
    raise ValueError("item weights have no decimal granularity up to 1e-6")


def _dp_select(profits: np.ndarray, weights: np.ndarray, capacity: float, max_cells: int) -> np.ndarray:
    scale = _weight_scale(weights)
    w = np.rint(weights * scale).astype(np.int64)
    cap = int(math.floor(capacity * scale + 1e-9))
    m = len(w)
    cells = m * (cap + 1)
    if cells > max_cells:
        raise KnapsackTooLargeError(f"DP table of {cells} cells exceeds the budget of {max_cells}")
    best = np.zeros(cap + 1)
    take = np.zeros((m, cap + 1), dtype=bool)
    for i in range(m):
        wi = w[i]
        if wi > cap:
            continue
        cand = best[: cap + 1 - wi] + profits[i]
        better = cand > best[wi:]
        take[i, wi:] = better
        best[wi:] = np.where(better, cand, best[wi:])
    mask = np.zeros(m, dtype=bool)
    c = cap
    for i in range(m - 1, -1, -1):
        if take[i, c]:
            mask[i] = True
            c -= w[i]
    return mask


def dp_knapsack(instance: TtpInstance, max_cells: int = DP_MAX_CELLS) -> np.ndarray:
    """Exact 0/1 knapsack by dynamic programming over integer-scaled weights.

    Raises:
        KnapsackTooLargeError: if ``m * (W + 1)`` exceeds ``max_cells``.
    """

    def build():
        mask = _dp_select(instance.item_profit, instance.item_weight, instance.capacity, max_cells)
        mask.setflags(write=False)
        return mask

    return _memoised(instance, f"dp:{max_cells}", build).copy()


def greedy_knapsack(instance: TtpInstance) -> np.ndarray:
    """Take items by descending profit/weight (lower index first on ties) while they fit."""
    ratio = instance.item_profit / instance.item_weight
    order = np.lexsort((np.arange(instance.n_items), -ratio))
    mask = np.zeros(instance.n_items, dtype=bool)
    room = instance.capacity
    for i in order:
        if instance.item_weight[i] <= room:
            mask[i] = True
            room -= instance.item_weight[i]
    return mask


def solver_knapsack(instance: TtpInstance, max_cells: int = DP_MAX_CELLS) -> np.ndarray:
    """DP optimum, or the greedy packing when the DP table is over budget."""
    try:
        return dp_knapsack(instance, max_cells)
    except KnapsackTooLargeError as exc:
        log.warning("%s; using the greedy packing", exc)
        return greedy_knapsack(instance)


def random_packing(instance: TtpInstance, rng: np.random.Generator) -> np.ndarray:
    """Random item order truncated before the first item that would overflow."""
    order = rng.permutation(instance.n_items)
    cum = np.cumsum(instance.item_weight[order])
    keep = int(np.searchsorted(cum, instance.capacity, side="right"))
    mask = np.zeros(instance.n_items, dtype=bool)
    mask[order[:keep]] = True
    return mask


def repair(picks: np.ndarray, instance: TtpInstance) -> np.ndarray:
    """Drop picked items with the lowest profit/weight (higher index first on ties) until feasible.

    Works in place on a single mask or on every row of a (P, m) mask.
    """
    if picks.ndim == 2:
        for row in picks:
            repair(row, instance)
        return picks
    excess = instance.item_weight[picks].sum() - instance.capacity
    if excess <= 0:
        return picks
    idx = np.flatnonzero(picks)
    ratio = instance.item_profit[idx] / instance.item_weight[idx]
    idx = idx[np.lexsort((-idx, ratio))]
    cum = np.cumsum(instance.item_weight[idx])
    drop = int(np.searchsorted(cum, excess - 1e-9, side="left")) + 1
    picks[idx[:drop]] = False
    # floating-point safety
    while instance.item_weight[picks].sum() > instance.capacity:
        picks[idx[drop]] = False
        drop += 1
    return picks


# --- mutations and population expansion ------------------------------------------


def swap_mutation(tour: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Exchange two cities, never the fixed start city. In place."""
    n = len(tour)
    if n < 3:
        return tour
    i, j = 1 + rng.choice(n - 1, size=2, replace=False)
    tour[i], tour[j] = tour[j], tour[i]
    return tour


def bitflip_mutation(picks: np.ndarray, rate: float, rng: np.random.Generator, instance: TtpInstance):
    """Flip each item bit with probability ``rate``, then repair. In place."""
    flips = rng.random(len(picks)) < rate
    picks ^= flips
    return repair(picks, instance)


def expand_to_population(
    base: Solution,
    pop_size: int,
    rng: np.random.Generator,
    instance: TtpInstance,
    *,
    mutate_tour: bool = True,
    mutate_packing: bool = True,
    exclude: set | None = None,
    max_attempts: int | None = None,
) -> list[Solution]:
    """Grow one seed into ``pop_size`` distinct feasible solutions.

    The unmodified seed comes first. Each further member starts from the seed
    and receives a single swap and/or a bit flip (then repair), repeated until
    it differs from every member so far and from the keys in ``exclude``
    (a seed found in ``exclude`` is itself left out).

    Raises:
        ValueError: when that many distinct solutions cannot be reached.
    """
    if pop_size < 1:
        raise ValueError("pop_size must be at least 1")
    if not (mutate_tour or mutate_packing):
        raise ValueError("at least one component must be mutable")
    base_picks = repair(base.picks.copy(), instance)
    seed = Solution(base.tour.copy(), base_picks, base.tag)
    seen = set(exclude) if exclude else set()
    out = []
    if seed.key() not in seen:
        out.append(seed)
        seen.add(seed.key())
    can_swap = mutate_tour and len(base.tour) >= 3
    attempts = 0
    limit = max_attempts if max_attempts is not None else 200 * pop_size + 1000
    m = len(base_picks)
    while len(out) < pop_size:
        tour = base.tour.copy()
        picks = base_picks.copy()
        while True:
            attempts += 1
            if attempts > limit:
                raise ValueError(f"could not reach {pop_size} distinct solutions from this seed")
            use_swap = can_swap and (not mutate_packing or rng.random() < 0.5)
            if use_swap:
                swap_mutation(tour, rng)
            else:
                picks[rng.integers(m)] ^= True
                repair(picks, instance)
            cand = Solution(tour, picks, base.tag)
            if cand.key() not in seen:
                break
        seen.add(cand.key())
        out.append(Solution(tour.copy(), picks.copy(), base.tag))
    return out


def construct_tour(method: str, instance: TtpInstance, rng: np.random.Generator) -> np.ndarray:
    method = ComponentMethod(method)
    if method is ComponentMethod.SOLVER:
        return solver_tour(instance)
    if method is ComponentMethod.GREEDY:
        return greedy_tour(instance)
    return random_tour(instance, rng)


def construct_packing(method: str, instance: TtpInstance, rng: np.random.Generator) -> np.ndarray:
    method = ComponentMethod(method)
    if method is ComponentMethod.SOLVER:
        return solver_knapsack(instance)
    if method is ComponentMethod.GREEDY:
        return greedy_knapsack(instance)
    return random_packing(instance, rng)
