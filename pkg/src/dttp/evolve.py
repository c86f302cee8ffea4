"""NSGA-II style engine with seeded initialisation and change-response strategies."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ChangeSchedule, apply_change
from .instance import TtpInstance, evaluate_batch
from .metrics import NadirPoint, hypervolume, max_spread, nadir
from .solvers import (
    Solution,
    construct_packing,
    construct_tour,
    expand_to_population,
    random_packing,
    random_tour,
    repair,
    swap_mutation,
)

METHODS = ("s", "g", "r")
STATIC_COMBOS = tuple(t + p for t in METHODS for p in METHODS)
ALL_CELLS = tuple((t, p) for t in METHODS for p in METHODS)
DYNAMIC_STRATEGIES = ("pS", "pG", "pR", "mS", "mG", "mR", "mC", "mN")


@dataclass(frozen=True)
class StrategySpec:
    """How a population (or a change response) is composed.

    ``cells`` lists (tour method, packing method) pairs, each receiving an
    equal share of the population. ``responsive`` is False only for mN.
    """

    id: str
    cells: tuple
    responsive: bool = True

    @property
    def tour_methods(self) -> list[str]:
        return sorted({t for t, _ in self.cells}, key=METHODS.index)

    @property
    def packing_methods(self) -> list[str]:
        return sorted({p for _, p in self.cells}, key=METHODS.index)


def strategy(strategy_id: str) -> StrategySpec:
    """Look up one of the static combos (ss..rr) or response strategies (pS..mN)."""
    sid = strategy_id
    if sid in STATIC_COMBOS:
        return StrategySpec(sid, ((sid[0], sid[1]),))
    if sid in ("pS", "pG", "pR"):
        m = sid[1].lower()
        return StrategySpec(sid, ((m, m),))
    if sid in ("mS", "mG", "mR"):
        m = sid[1].lower()
        return StrategySpec(sid, tuple((m, p) for p in METHODS))
    if sid == "mC":
        return StrategySpec(sid, ALL_CELLS)
    if sid == "mN":
        return StrategySpec(sid, ALL_CELLS, responsive=False)
    raise ValueError(f"unknown strategy {strategy_id!r}")


@dataclass(frozen=True)
class EaConfig:
    pop_size: int = 60
    generations_static: int = 1000
    crossover_rate: float = 0.9
    swap_rate: float = 0.2
    bitflip_rate: float | None = None  # None: 1/m
    tournament_size: int = 2
    # single random seed expanded by mutation instead of independent draws
    seeded_random: bool = False

    def __post_init__(self):
        if self.pop_size < 4 or self.pop_size % 2:
            raise ValueError("pop_size must be even and at least 4")
        for name in ("crossover_rate", "swap_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.bitflip_rate is not None and not 0 <= self.bitflip_rate <= 1:
            raise ValueError("bitflip_rate must lie in [0, 1]")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be at least 1")

    def flip_rate(self, n_items: int) -> float:
        return 1.0 / n_items if self.bitflip_rate is None else self.bitflip_rate


@dataclass
class Population:
    """Genotypes and objectives of a population, one row per member."""

    tours: np.ndarray
    picks: np.ndarray
    tags: np.ndarray
    objectives: np.ndarray
    rank: np.ndarray | None = None
    crowding: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.tours)

    @classmethod
    def from_solutions(cls, solutions: list[Solution], instance: TtpInstance) -> Population:
        tours = np.array([s.tour for s in solutions], dtype=np.int64)
        picks = np.array([s.picks for s in solutions], dtype=bool)
        tags = np.array([s.tag for s in solutions], dtype=object)
        return cls(tours, picks, tags, evaluate_batch(instance, tours, picks))

    def solutions(self) -> list[Solution]:
        return [Solution(t.copy(), p.copy(), tag) for t, p, tag in zip(self.tours, self.picks, self.tags)]

    def keys(self) -> list[bytes]:
        return _row_keys(self.tours, self.picks)

    def take(self, idx) -> Population:
        idx = np.asarray(idx, dtype=np.int64)
        return Population(
            self.tours[idx],
            self.picks[idx],
            self.tags[idx],
            self.objectives[idx],
            None if self.rank is None else self.rank[idx],
            None if self.crowding is None else self.crowding[idx],
        )

    def concat(self, other: Population) -> Population:
        return Population(
            np.concatenate([self.tours, other.tours]),
            np.concatenate([self.picks, other.picks]),
            np.concatenate([self.tags, other.tags]),
            np.concatenate([self.objectives, other.objectives]),
        )

    def reevaluate(self, instance: TtpInstance) -> Population:
        return Population(self.tours.copy(), self.picks.copy(), self.tags.copy(),
                          evaluate_batch(instance, self.tours, self.picks))

    def first_front(self) -> np.ndarray:
        ranks = self.rank if self.rank is not None else nondominated_sort(self.objectives)[1]
        return self.objectives[ranks == 0]


def _row_keys(tours: np.ndarray, picks: np.ndarray) -> list[bytes]:
    packed = np.packbits(picks, axis=1)
    return [t.tobytes() + p.tobytes() for t, p in zip(tours, packed)]


# --- initialisation ----------------------------------------------------------


def split_shares(total: int, parts: int) -> list[int]:
    """Equal shares; the remainder goes to the earlier parts."""
    base, extra = divmod(total, parts)
    return [base + (1 if k < extra else 0) for k in range(parts)]


def _build_cell(tm, pm, count, instance, config, rng, seen) -> list[Solution]:
    tag = tm + pm
    random_tour_part = tm == "r" and not config.seeded_random
    random_pack_part = pm == "r" and not config.seeded_random
    if not (random_tour_part or random_pack_part):
        seed = Solution(construct_tour(tm, instance, rng), construct_packing(pm, instance, rng), tag)
        members = expand_to_population(seed, count, rng, instance, exclude=seen)
        seen.update(s.key() for s in members)
        return members

    fixed_tour = None if random_tour_part else construct_tour(tm, instance, rng)
    fixed_pack = None if random_pack_part else construct_packing(pm, instance, rng)
    members: list[Solution] = []
    misses = 0
    while len(members) < count:
        tour = random_tour(instance, rng) if random_tour_part else fixed_tour.copy()
        picks = random_packing(instance, rng) if random_pack_part else fixed_pack.copy()
        if misses > 20:
            # tiny instances: perturb the fixed part too
            if fixed_tour is not None:
                swap_mutation(tour, rng)
            if fixed_pack is not None:
                picks[rng.integers(len(picks))] ^= True
                repair(picks, instance)
        sol = Solution(tour, picks, tag)
        if sol.key() in seen:
            misses += 1
            if misses > 200 * count + 1000:
                raise ValueError(f"could not build {count} distinct {tag} solutions")
            continue
        seen.add(sol.key())
        members.append(sol)
    return members


def initialize(strategy_spec: StrategySpec | str, instance: TtpInstance, config: EaConfig,
               rng: np.random.Generator, size: int | None = None) -> Population:
    """Build ``size`` (default pop_size) distinct feasible solutions for a strategy.

    Cells built from solver/greedy components start from the single
    constructed seed and are filled by mutation; random components are drawn
    independently for every member.
    """
    spec = strategy(strategy_spec) if isinstance(strategy_spec, str) else strategy_spec
    size = config.pop_size if size is None else size
    seen: set = set()
    solutions: list[Solution] = []
    for (tm, pm), share in zip(spec.cells, split_shares(size, len(spec.cells))):
        if share:
            solutions += _build_cell(tm, pm, share, instance, config, rng, seen)
    pop = Population.from_solutions(solutions, instance)
    return assign_rank_crowding(pop)


# --- non-dominated sorting ------------------------------------------------------


def dominance_matrix(objectives) -> np.ndarray:
    """``D[i, j]`` is True when row i dominates row j (min time, max profit)."""
    f = objectives[:, 0]
    g = objectives[:, 1]
    weak = (f[:, None] <= f[None, :]) & (g[:, None] >= g[None, :])
    strict = (f[:, None] < f[None, :]) | (g[:, None] > g[None, :])
    return weak & strict


def nondominated_sort(objectives) -> tuple[list[np.ndarray], np.ndarray]:
    """Pareto fronts (lists of row indices) and the 0-based front rank of every row."""
    objectives = np.asarray(objectives, dtype=float)
    n = len(objectives)
    dom = dominance_matrix(objectives)
    count = dom.sum(axis=0)
    ranks = np.full(n, -1, dtype=np.int64)
    fronts = []
    current = np.flatnonzero(count == 0)
    r = 0
    while current.size:
        ranks[current] = r
        fronts.append(current)
        count = count - dom[current].sum(axis=0)
        count[ranks >= 0] = -1
        current = np.flatnonzero(count == 0)
        r += 1
    return fronts, ranks


def crowding_distance(objectives) -> np.ndarray:
    """Standard cuboid crowding distance within one front; boundary points get inf."""
    obj = np.asarray(objectives, dtype=float)
    n = len(obj)
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for k in range(obj.shape[1]):
        order = np.argsort(obj[:, k], kind="stable")
        vals = obj[order, k]
        span = vals[-1] - vals[0]
        dist[order[0]] = dist[order[-1]] = np.inf
        if span > 0:
            dist[order[1:-1]] += (vals[2:] - vals[:-2]) / span
    return dist


def assign_rank_crowding(pop: Population) -> Population:
    fronts, ranks = nondominated_sort(pop.objectives)
    crowd = np.zeros(len(pop))
    for front in fronts:
        crowd[front] = crowding_distance(pop.objectives[front])
    pop.rank, pop.crowding = ranks, crowd
    return pop


def environmental_selection(pop: Population, size: int) -> Population:
    """Keep ``size`` members by front rank, then by descending crowding distance."""
    assign_rank_crowding(pop)
    order = np.lexsort((np.arange(len(pop)), -pop.crowding, pop.rank))
    return pop.take(np.sort(order[:size]))


# --- variation ---------------------------------------------------------------------


def order_crossover(p1: np.ndarray, p2: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """OX on the positions after the fixed start city."""
    t1, t2 = p1[1:], p2[1:]
    n = len(t1)
    if n < 2:
        return p1.copy()
    i, j = np.sort(rng.choice(n + 1, size=2, replace=False))
    child = np.empty(n, dtype=p1.dtype)
    child[i:j] = t1[i:j]
    rotated = np.roll(t2, -j)
    used = np.zeros(n + 1, dtype=bool)
    used[t1[i:j]] = True
    fill = rotated[~used[rotated]]
    positions = (np.arange(j, j + len(fill))) % n
    child[positions] = fill
    return np.concatenate([p1[:1], child])


def tournament(pop: Population, n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``n`` winners of size-``k`` tournaments on (rank, crowding)."""
    contestants = rng.integers(len(pop), size=(n, k))
    best = contestants[:, 0]
    for c in range(1, k):
        challenger = contestants[:, c]
        better = (pop.rank[challenger] < pop.rank[best]) | (
            (pop.rank[challenger] == pop.rank[best]) & (pop.crowding[challenger] > pop.crowding[best])
        )
        best = np.where(better, challenger, best)
    return best


def make_offspring(pop: Population, instance: TtpInstance, config: EaConfig,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    size = len(pop)
    parents = tournament(pop, size, config.tournament_size, rng)
    tours = pop.tours[parents].copy()
    picks = pop.picks[parents].copy()
    tags = pop.tags[parents].copy()
    m = picks.shape[1]
    for a in range(0, size - 1, 2):
        b = a + 1
        if rng.random() < config.crossover_rate:
            pa, pb = tours[a].copy(), tours[b].copy()
            tours[a] = order_crossover(pa, pb, rng)
            tours[b] = order_crossover(pb, pa, rng)
            if m > 1:
                cut = int(rng.integers(1, m))
                tail = picks[a, cut:].copy()
                picks[a, cut:] = picks[b, cut:]
                picks[b, cut:] = tail
    if config.swap_rate > 0:
        for r in np.flatnonzero(rng.random(size) < config.swap_rate):
            swap_mutation(tours[r], rng)
    rate = config.flip_rate(m)
    if rate > 0:
        picks ^= rng.random(picks.shape) < rate
    over = np.flatnonzero(picks @ instance.item_weight > instance.capacity)
    for r in over:
        repair(picks[r], instance)
    return tours, picks, tags


def _merge_unique(pop: Population, tours, picks, tags, instance) -> Population:
    seen = set(pop.keys())
    keep = []
    for r, key in enumerate(_row_keys(tours, picks)):
        if key not in seen:
            seen.add(key)
            keep.append(r)
    if not keep:
        return pop
    keep = np.asarray(keep)
    children = Population(tours[keep], picks[keep], tags[keep],
                          evaluate_batch(instance, tours[keep], picks[keep]))
    return pop.concat(children)


def step_generation(pop: Population, instance: TtpInstance, config: EaConfig,
                    rng: np.random.Generator) -> Population:
    """One generation: tournament, OX + one-point crossover, swap + bitflip, elitist truncation.

    Offspring identical to a current member or an earlier child are discarded
    before selection.
    """
    if pop.rank is None or pop.crowding is None:
        assign_rank_crowding(pop)
    tours, picks, tags = make_offspring(pop, instance, config, rng)
    merged = _merge_unique(pop, tours, picks, tags, instance)
    if merged is pop:
        return pop
    return environmental_selection(merged, len(pop))


def respond_to_change(strategy_spec: StrategySpec | str, new_instance: TtpInstance, pop: Population,
                      config: EaConfig, rng: np.random.Generator) -> Population:
    """Re-evaluate survivors on the new instance and, unless passive, merge in a fresh response set."""
    spec = strategy(strategy_spec) if isinstance(strategy_spec, str) else strategy_spec
    survivors = pop.reevaluate(new_instance)
    if not spec.responsive:
        return assign_rank_crowding(survivors)
    response = initialize(spec, new_instance, config, rng)
    merged = _merge_unique(survivors, response.tours, response.picks, response.tags, new_instance)
    return environmental_selection(merged, len(pop))


# --- runs ----------------------------------------------------------------------------


@dataclass
class Snapshot:
    interval: int
    generation: int
    hypervolume: float
    spread: float
    population: Population


@dataclass
class RunTrace:
    """Per-generation metrics of one run plus end-of-interval snapshots."""

    strategy: str
    schedule_seed: int | None
    generations: list = field(default_factory=list)
    intervals: list = field(default_factory=list)
    hypervolumes: list = field(default_factory=list)
    spreads: list = field(default_factory=list)
    fronts: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    final_population: Population | None = None

    def record(self, generation: int, interval: int, pop: Population, ref: NadirPoint, keep_front: bool):
        front = pop.first_front()
        self.generations.append(generation)
        self.intervals.append(interval)
        self.hypervolumes.append(hypervolume(front, ref))
        self.spreads.append(max_spread(front))
        if keep_front:
            self.fronts.append(front.copy())

    def trace_rows(self, run_id: str):
        for g, k, hv, sp in zip(self.generations, self.intervals, self.hypervolumes, self.spreads):
            yield (run_id, self.strategy, self.schedule_seed, g, k, hv, sp)

    def snapshot_rows(self, run_id: str):
        for s in self.snapshots:
            yield (run_id, s.interval, s.hypervolume, s.spread)


TRACE_HEADER = ("run_id", "strategy", "schedule_seed", "generation", "interval", "hypervolume", "spread")
SNAPSHOT_HEADER = ("run_id", "interval", "end_hv", "end_spread")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def trace_csv(trace: RunTrace, run_id: str) -> str:
    return _csv_text(TRACE_HEADER, trace.trace_rows(run_id))


def snapshot_csv(trace: RunTrace, run_id: str) -> str:
    return _csv_text(SNAPSHOT_HEADER, trace.snapshot_rows(run_id))


def run_dynamic(instance: TtpInstance, schedule: ChangeSchedule, strategy_spec: StrategySpec | str,
                config: EaConfig, rng: np.random.Generator, *, reference: NadirPoint | None = None,
                keep_fronts: bool = False, initial: Population | None = None) -> RunTrace:
    """Evolve through a change schedule.

    The run lasts ``period * (n_changes + 1)`` generations. After the step of
    each change generation the population is snapshotted (pre-change), the
    change is applied and the strategy responds. Generation 0 is the initial
    population; interval ``k`` covers generations after the k-th change up to
    and including the next change generation.
    """
    spec = strategy(strategy_spec) if isinstance(strategy_spec, str) else strategy_spec
    schedule.validate(instance)
    ref = nadir(instance) if reference is None else reference
    period = schedule.config.period
    total = period * (len(schedule.events) + 1)
    events = {ev.at_generation: ev for ev in schedule.events}
    if any(g % period or g > total - period for g in events):
        raise ValueError("schedule events are not on the configured period")

    current = instance
    pop = initialize(spec, current, config, rng) if initial is None else initial
    trace = RunTrace(spec.id, schedule.seed)
    interval = 0
    trace.record(0, interval, pop, ref, keep_fronts)
    for gen in range(1, total + 1):
        pop = step_generation(pop, current, config, rng)
        trace.record(gen, interval, pop, ref, keep_fronts)
        if gen in events:
            trace.snapshots.append(
                Snapshot(interval, gen, trace.hypervolumes[-1], trace.spreads[-1], pop)
            )
            current = apply_change(current, events[gen], schedule.config.change_factor)
            pop = respond_to_change(spec, current, pop, config, rng)
            interval += 1
    trace.snapshots.append(Snapshot(interval, total, trace.hypervolumes[-1], trace.spreads[-1], pop))
    trace.final_population = pop
    return trace


def run_static_evolution(instance: TtpInstance, strategy_spec: StrategySpec | str, config: EaConfig,
                         rng: np.random.Generator, generations: int | None = None
                         ) -> tuple[Population, Population]:
    """Evolve without changes; returns (initial, final) populations."""
    generations = config.generations_static if generations is None else generations
    initial = initialize(strategy_spec, instance, config, rng)
    pop = initial
    for _ in range(generations):
        pop = step_generation(pop, instance, config, rng)
    return initial, pop


# --- conservation ----------------------------------------------------------------


def _edges(tour) -> set:
    tour = np.asarray(tour)
    nxt = np.roll(tour, -1)
    return {(min(a, b), max(a, b)) for a, b in zip(tour.tolist(), nxt.tolist())}


def tour_conservation(initial, final) -> float:
    """Percentage of the initial tour's undirected adjacencies (closing edge included) kept in ``final``."""
    if len(initial) != len(final):
        raise ValueError("tours of different lengths")
    first = _edges(initial)
    return 100.0 * len(first & _edges(final)) / len(first)


def packing_conservation(initial, final, item_city) -> float:
    """Half item-index overlap, half collection-city overlap (multiset), in percent.

    Each overlap is ``|intersection| / max(|initial|, |final|)``. Two empty
    plans count as fully conserved; exactly one empty plan as 0.
    """
    initial = np.asarray(initial, dtype=bool)
    final = np.asarray(final, dtype=bool)
    if initial.shape != final.shape:
        raise ValueError("packing plans of different sizes")
    a, b = int(initial.sum()), int(final.sum())
    if a == 0 and b == 0:
        return 100.0
    if a == 0 or b == 0:
        return 0.0
    denom = max(a, b)
    items = int((initial & final).sum()) / denom
    item_city = np.asarray(item_city)
    cities_a = Counter(item_city[initial].tolist())
    cities_b = Counter(item_city[final].tolist())
    cities = sum((cities_a & cities_b).values()) / denom
    return 100.0 * (0.5 * items + 0.5 * cities)
