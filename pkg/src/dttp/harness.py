"""Instance generation and experiment orchestration with CSV artifacts.

Every random stream in an experiment is derived from the plan's master seed
by hashing, so a plan file fully determines its outputs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

from .dynamics import DynamicsConfig, generate_schedule, load_schedule, save_schedule
from .evolve import (
    DYNAMIC_STRATEGIES,
    STATIC_COMBOS,
    SNAPSHOT_HEADER,
    TRACE_HEADER,
    EaConfig,
    _csv_text,
    initialize,
    packing_conservation,
    run_dynamic,
    step_generation,
    strategy,
    tour_conservation,
)
from .instance import TtpInstance, make_instance, read_instance, write_instance
from .metrics import IncompleteGridError, nondominated_mask, rank_strategies

log = logging.getLogger(__name__)

KP_TYPES = {
    # items per non-start city, capacity class c in W = floor(c/11 * sum(w))
    "A": (1, 3),
    "B": (5, 6),
    "C": (10, 9),
}
BUILTIN_TSP = ("berlin52",)


def derive_seed(master: int, *keys) -> int:
    """64-bit seed from a master seed and any labels (sha256 of their text form)."""
    text = "|".join(str(k) for k in (master, *keys))
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


# --- instances --------------------------------------------------------------------


def read_coordinates(source: str | os.PathLike) -> tuple[str, np.ndarray]:
    """Coordinates from a built-in name or a file of ``id x y`` rows (TSPLIB headers allowed)."""
    if str(source) in BUILTIN_TSP:
        text = resources.files("dttp.data").joinpath(f"{source}.tsp").read_text()
        name = str(source)
    else:
        text = Path(source).read_text()
        name = Path(source).stem
    rows = []
    in_section = "NODE_COORD_SECTION" not in text
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        if s.upper().startswith("NODE_COORD_SECTION"):
            in_section = True
            continue
        if s.upper() == "EOF":
            break
        if not in_section:
            continue
        parts = s.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'id x y', got {s!r}")
        try:
            rows.append((float(parts[1]), float(parts[2])))
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric coordinate in {s!r}") from None
    if len(rows) < 3:
        raise ValueError(f"coordinate source {source} has fewer than 3 cities")
    return name, np.array(rows)


@dataclass(frozen=True)
class InstanceSpec:
    tsp_source: str
    kp_type: str
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kp_type", self.kp_type.upper())
        if self.kp_type not in KP_TYPES:
            raise ValueError(f"kp_type must be one of {sorted(KP_TYPES)}")


def generate_instance(spec: InstanceSpec) -> TtpInstance:
    """Build an A/B/C instance over a coordinate source.

    A: w ~ U{1..1000}, p = w + 100, one item per city.
    B: w ~ U{1000..1010}, p ~ U{1..1000}, five items per city.
    C: w, p ~ U{1..1000} independently, ten items per city.
    Items are listed in blocks: item k of every non-start city in city order.
    """
    name, coords = read_coordinates(spec.tsp_source)
    per_city, c = KP_TYPES[spec.kp_type]
    n = len(coords)
    cities = np.tile(np.arange(1, n), per_city)
    m = len(cities)
    rng = generator(derive_seed(spec.seed, "instance", name, spec.kp_type))
    if spec.kp_type == "A":
        weights = rng.integers(1, 1001, m)
        profits = weights + 100
    elif spec.kp_type == "B":
        weights = rng.integers(1000, 1011, m)
        profits = rng.integers(1, 1001, m)
    else:
        weights = rng.integers(1, 1001, m)
        profits = rng.integers(1, 1001, m)
    capacity = float(np.floor(c / 11 * weights.sum()))
    if not 0 < capacity < weights.sum():
        raise ValueError("generated capacity is not binding")
    return make_instance(coords, profits, weights, cities, capacity, name=f"{name}-{spec.kp_type}")


# --- plans -------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentPlan:
    instance: InstanceSpec
    dynamics: DynamicsConfig
    n_schedules: int = 10
    n_repeats: int = 30
    strategies: tuple = DYNAMIC_STRATEGIES
    seed: int = 0
    output_dir: str = "results"
    ea: EaConfig = field(default_factory=EaConfig)
    workers: int = 1

    def __post_init__(self):
        if self.n_schedules < 1 or self.n_repeats < 1:
            raise ValueError("n_schedules and n_repeats must be at least 1")
        for s in self.strategies:
            strategy(s)
        if len(set(self.strategies)) != len(self.strategies):
            raise ValueError("duplicate strategies in plan")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["strategies"] = list(self.strategies)
        return d

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentPlan:
        d = dict(d)
        inst = d.pop("instance")
        dyn = d.pop("dynamics")
        ea = d.pop("ea", {})
        if "strategies" in d:
            d["strategies"] = tuple(d["strategies"])
        known = {"n_schedules", "n_repeats", "strategies", "seed", "output_dir", "workers"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown plan fields {sorted(unknown)}")
        return cls(InstanceSpec(**inst), DynamicsConfig(**dyn), ea=EaConfig(**ea), **d)


def load_plan(path: str | os.PathLike) -> ExperimentPlan:
    with open(path, encoding="utf-8") as fh:
        try:
            return ExperimentPlan.from_dict(json.load(fh))
        except (TypeError, KeyError) as exc:
            raise ValueError(f"malformed plan file: {exc}") from exc


def save_plan(plan: ExperimentPlan, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(plan.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def run_id(schedule: int, strategy_id: str, repeat: int) -> str:
    return f"s{schedule:02d}-{strategy_id}-r{repeat:02d}"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _run_cell(args):
    instance_path, schedule_path, schedule_idx, strategy_id, repeat, seed, ea, out_dir = args
    instance = read_instance(instance_path)
    schedule = load_schedule(schedule_path, instance)
    rid = run_id(schedule_idx, strategy_id, repeat)
    try:
        trace = run_dynamic(instance, schedule, strategy_id, ea, generator(seed))
    except Exception as exc:  # recorded in the manifest; the grid carries on
        return rid, None, f"{type(exc).__name__}: {exc}"
    rows = list(trace.trace_rows(rid))
    trace_path = Path(out_dir) / "traces" / f"{rid}.csv"
    trace_path.write_text(_csv_text(TRACE_HEADER, rows))
    snaps = [(rid, s.interval, s.hypervolume, s.spread) for s in trace.snapshots]
    return rid, {"trace": rows, "snapshots": snaps}, None


SNAPSHOT_COLUMNS = (*SNAPSHOT_HEADER, "strategy", "schedule", "repeat")
PROFILE_HEADER = ("strategy", "generation", "interval", "mean_hv", "mean_spread")
RANK_HEADER = ("strategy", "interval", "metric", "median_rank")


def run_experiment(plan: ExperimentPlan, output_dir: str | os.PathLike | None = None) -> Path:
    """Run the schedule x strategy x repeat grid and write all artifacts.

    Layout of the output directory::

        instance.ttp, plan.json, schedules/schedule_XX.json, traces/<run>.csv,
        snapshots.csv, profiles.csv, ranks.csv (two or more strategies),
        manifest.json
    """
    out = Path(output_dir if output_dir is not None else plan.output_dir)
    (out / "schedules").mkdir(parents=True, exist_ok=True)
    (out / "traces").mkdir(exist_ok=True)
    save_plan(plan, out / "plan.json")

    instance = generate_instance(plan.instance)
    instance_path = out / "instance.ttp"
    write_instance(instance, instance_path)

    schedule_files = []
    manifest = {
        "plan_digest": plan.digest(),
        "instance": {"file": instance_path.name, "sha256": _sha256(instance_path)},
        "schedules": [],
        "runs": [],
        "failed": [],
        "notices": [],
    }
    for k in range(plan.n_schedules):
        seed = derive_seed(plan.seed, "schedule", k)
        schedule = generate_schedule(instance, plan.dynamics, seed)
        path = out / "schedules" / f"schedule_{k:02d}.json"
        save_schedule(schedule, path)
        schedule_files.append(path)
        manifest["schedules"].append(
            {"index": k, "seed": seed, "config_digest": plan.dynamics.digest(),
             "file": f"schedules/{path.name}", "sha256": _sha256(path)}
        )

    jobs = []
    for k, spath in enumerate(schedule_files):
        for sid in plan.strategies:
            for r in range(plan.n_repeats):
                seed = derive_seed(plan.seed, k, r, sid)
                jobs.append((str(instance_path), str(spath), k, sid, r, seed, plan.ea, str(out)))
                manifest["runs"].append({"run_id": run_id(k, sid, r), "seed": seed})

    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]

    snapshot_rows = []
    trace_frames = []
    for (rid, payload, error), job in zip(results, jobs):
        _, _, k, sid, r, *_ = job
        if error is not None:
            manifest["failed"].append({"run_id": rid, "error": error})
            log.warning("run %s failed: %s", rid, error)
            continue
        snapshot_rows += [(*row, sid, k, r) for row in payload["snapshots"]]
        trace_frames.append(pd.DataFrame(payload["trace"], columns=TRACE_HEADER))

    (out / "snapshots.csv").write_text(_csv_text(SNAPSHOT_COLUMNS, snapshot_rows))

    if trace_frames:
        traces = pd.concat(trace_frames, ignore_index=True)
        prof = (
            traces.groupby(["strategy", "generation", "interval"], sort=False)[["hypervolume", "spread"]]
            .mean()
            .reset_index()
        )
        order = {s: i for i, s in enumerate(plan.strategies)}
        prof = prof.assign(_order=prof["strategy"].map(order)).sort_values(["_order", "generation"])
        rows = prof[["strategy", "generation", "interval", "hypervolume", "spread"]].itertuples(index=False)
        (out / "profiles.csv").write_text(
            _csv_text(PROFILE_HEADER, ((s, int(g), int(i), float(h), float(p)) for s, g, i, h, p in rows))
        )

    ranks_path = out / "ranks.csv"
    if len(plan.strategies) < 2:
        manifest["notices"].append("single strategy: ranking skipped")
    elif manifest["failed"]:
        manifest["notices"].append("incomplete grid: ranking skipped")
    else:
        snaps = pd.DataFrame(snapshot_rows, columns=SNAPSHOT_COLUMNS)
        try:
            table = rank_table_from_snapshots(snaps)
        except IncompleteGridError as exc:
            manifest["notices"].append(f"ranking refused: {exc}")
        else:
            ranks_path.write_text(rank_csv(table))

    artifacts = sorted(
        p for p in out.rglob("*.csv") if p.is_file()
    ) + sorted((out / "schedules").glob("*.json"))
    manifest["artifacts"] = {str(p.relative_to(out)): _sha256(p) for p in artifacts}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return out


def rank_table_from_snapshots(snaps: pd.DataFrame) -> pd.DataFrame:
    """Rank post-change intervals (interval >= 1) from a snapshot table."""
    snaps = snaps.rename(columns={"end_hv": "hv", "end_spread": "spread"})
    post = snaps[snaps["interval"] >= 1]
    if post.empty:
        raise IncompleteGridError("no post-change snapshots to rank")
    return rank_strategies(post)


def rank_csv(table: pd.DataFrame) -> str:
    rows = ((s, int(i), m, float(r)) for s, i, m, r in table[list(RANK_HEADER)].itertuples(index=False))
    return _csv_text(RANK_HEADER, rows)


def rank_file(snapshot_csv: str | os.PathLike, out_csv: str | os.PathLike) -> pd.DataFrame:
    snaps = pd.read_csv(snapshot_csv)
    missing = {"strategy", "schedule", "repeat"} - set(snaps.columns)
    if missing:
        # recover the grid keys from run ids of the form sNN-<strategy>-rNN
        parts = snaps["run_id"].str.extract(r"^s(\d+)-(.+)-r(\d+)$")
        if parts.isna().any().any():
            raise ValueError("snapshot table lacks grid columns and run ids are not parseable")
        snaps["schedule"] = parts[0].astype(int)
        snaps["strategy"] = parts[1]
        snaps["repeat"] = parts[2].astype(int)
    table = rank_table_from_snapshots(snaps)
    Path(out_csv).write_text(rank_csv(table))
    return table


# --- static study ------------------------------------------------------------------


@dataclass
class StaticResult:
    combo: str
    initial_seed_tour: np.ndarray
    initial_seed_picks: np.ndarray
    final_objectives: np.ndarray
    final_tours: np.ndarray
    final_picks: np.ndarray
    tour_conservation: np.ndarray
    packing_conservation: np.ndarray

    def to_csv(self) -> str:
        header = ("combo", "index", "tour_time", "profit", "tour_conservation", "packing_conservation")
        rows = (
            (self.combo, i, float(f), float(g), float(tc), float(pc))
            for i, ((f, g), tc, pc) in enumerate(
                zip(self.final_objectives, self.tour_conservation, self.packing_conservation)
            )
        )
        return _csv_text(header, rows)


def run_static(instance: TtpInstance, combo: str, config: EaConfig | None = None, seed: int = 0,
               generations: int | None = None) -> StaticResult:
    """Evolve one static combo and measure conservation against its seed components.

    Random components follow the localisation study: one random tour/packing
    is drawn and expanded by mutation, so every combo has a single seed to
    measure conservation against.
    """
    if combo not in STATIC_COMBOS:
        raise ValueError(f"combo must be one of {STATIC_COMBOS}")
    config = replace(config or EaConfig(), seeded_random=True)
    rng = generator(derive_seed(seed, "static", combo))
    pop = initialize(combo, instance, config, rng)
    seed_tour, seed_picks = pop.tours[0].copy(), pop.picks[0].copy()
    for _ in range(config.generations_static if generations is None else generations):
        pop = step_generation(pop, instance, config, rng)
    tc = np.array([tour_conservation(seed_tour, t) for t in pop.tours])
    pc = np.array([packing_conservation(seed_picks, p, instance.item_city) for p in pop.picks])
    return StaticResult(combo, seed_tour, seed_picks, pop.objectives.copy(), pop.tours.copy(),
                        pop.picks.copy(), tc, pc)


def composite_front(results: list[StaticResult]) -> pd.DataFrame:
    """Union of final populations filtered to mutually non-dominated points."""
    frames = [
        pd.DataFrame({"combo": r.combo, "tour_time": r.final_objectives[:, 0], "profit": r.final_objectives[:, 1]})
        for r in results
    ]
    allpts = pd.concat(frames, ignore_index=True)
    mask = nondominated_mask(allpts[["tour_time", "profit"]].to_numpy())
    return allpts[mask].drop_duplicates(["tour_time", "profit"]).reset_index(drop=True)
