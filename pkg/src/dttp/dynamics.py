"""Reproducible change schedules for city-location, availability and item-value dynamics.

A schedule is generated once from ``(instance, config, seed)`` and stored with
every random draw expanded, so each strategy replays exactly the same changes
without touching a random generator.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .instance import TtpInstance, make_instance

KINDS = ("loc", "ava", "val")
SCHEDULE_FORMAT = 1


@dataclass(frozen=True)
class DynamicsConfig:
    """Parameters of one dynamics kind.

    ``magnitude`` is a number of cities for ``loc`` and a percentage of the
    items for ``ava``/``val``; ``None`` picks the defaults (2 cities, 5 %).
    """

    kind: str
    magnitude: float | None = None
    change_factor: float = 0.02
    period: int = 200
    n_changes: int = 5

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in KINDS:
            raise ValueError(f"unknown dynamics kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        if self.magnitude is None:
            object.__setattr__(self, "magnitude", 2 if kind == "loc" else 5.0)
        if kind == "loc":
            if float(self.magnitude) != int(self.magnitude) or self.magnitude < 1:
                raise ValueError("loc magnitude must be a positive whole number of cities")
            object.__setattr__(self, "magnitude", int(self.magnitude))
        elif not 0 < self.magnitude <= 100:
            raise ValueError("ava/val magnitude is a percentage in (0, 100]")
        else:
            object.__setattr__(self, "magnitude", float(self.magnitude))
        object.__setattr__(self, "change_factor", float(self.change_factor))
        object.__setattr__(self, "period", int(self.period))
        object.__setattr__(self, "n_changes", int(self.n_changes))
        if not 0 < self.change_factor < 1:
            raise ValueError("change factor must lie in (0, 1)")
        if self.period < 1 or self.n_changes < 1:
            raise ValueError("period and n_changes must be at least 1")

    def change_generations(self) -> list[int]:
        return [self.period * k for k in range(1, self.n_changes + 1)]

    @property
    def total_generations(self) -> int:
        return self.period * (self.n_changes + 1)

    def digest(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class ChangeEvent:
    """One change. ``targets`` are 0-based city (loc) or item (ava/val) indices.

    ``values`` per target: ``(x, y)`` for loc, the new 0-based city for ava,
    the sign (+1/-1) for val.
    """

    at_generation: int
    kind: str
    targets: tuple
    values: tuple


@dataclass(frozen=True)
class ChangeSchedule:
    kind: str
    seed: int
    config: DynamicsConfig
    n_cities: int
    n_items: int
    events: tuple

    def validate(self, instance: TtpInstance) -> None:
        """Raise ``ValueError`` if the schedule does not fit ``instance``."""
        if self.kind != self.config.kind:
            raise ValueError("schedule kind disagrees with its config")
        if (self.n_cities, self.n_items) != (instance.n_cities, instance.n_items):
            raise ValueError(
                f"schedule built for {self.n_cities} cities/{self.n_items} items, "
                f"instance has {instance.n_cities}/{instance.n_items}"
            )
        last = 0
        for ev in self.events:
            if ev.kind != self.kind:
                raise ValueError("event kind disagrees with schedule kind")
            if ev.at_generation <= last:
                raise ValueError("event generations must be strictly increasing and positive")
            last = ev.at_generation
            _check_event(instance, ev)

    def digest(self) -> str:
        return hashlib.sha256(schedule_to_json(self).encode()).hexdigest()


def feasible_region(coords) -> tuple[tuple[float, float], tuple[float, float]]:
    """Axis ranges for relocated cities: initial range widened by 5 % each side, clamped at 0."""
    coords = np.asarray(coords, dtype=float)
    region = []
    for axis in range(2):
        lo, hi = float(coords[:, axis].min()), float(coords[:, axis].max())
        pad = 0.05 * (hi - lo)
        region.append((max(0.0, lo - pad), hi + pad))
    return region[0], region[1]


def item_count(percent: float, n_items: int) -> int:
    """Items touched per event; round-half-to-even of ``percent% * m``."""
    return int(round(percent / 100.0 * n_items))


def _generator(seed: int, config: DynamicsConfig) -> np.random.Generator:
    digest_words = [int(config.digest()[i : i + 8], 16) for i in range(0, 32, 8)]
    seed = int(seed) % 2**64
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *digest_words])))


def generate_schedule(instance: TtpInstance, config: DynamicsConfig, seed: int) -> ChangeSchedule:
    """Draw every change for ``config`` up front.

    Draw order per event is fixed: the target set first, then payload values
    for the targets in ascending index order (x before y for locations).
    """
    n, m = instance.n_cities, instance.n_items
    if config.kind == "loc":
        count = config.magnitude
        if count >= n:
            raise ValueError(f"cannot move {count} of {n} cities")
        population = n
        (x_lo, x_hi), (y_lo, y_hi) = feasible_region(instance.coords)
    else:
        count = item_count(config.magnitude, m)
        if count == 0:
            raise ValueError(f"{config.magnitude}% of {m} items rounds to zero items per change")
        population = m

    rng = _generator(seed, config)
    events = []
    for gen in config.change_generations():
        targets = np.sort(rng.choice(population, size=count, replace=False))
        if config.kind == "loc":
            values = tuple(
                (float(rng.uniform(x_lo, x_hi)), float(rng.uniform(y_lo, y_hi))) for _ in targets
            )
        elif config.kind == "ava":
            values = tuple(int(rng.integers(0, n)) for _ in targets)
        else:
            values = tuple(int(2 * rng.integers(0, 2) - 1) for _ in targets)
        events.append(ChangeEvent(gen, config.kind, tuple(int(t) for t in targets), values))
    return ChangeSchedule(config.kind, int(seed), config, n, m, tuple(events))


def _check_event(instance: TtpInstance, event: ChangeEvent) -> None:
    limit = instance.n_cities if event.kind == "loc" else instance.n_items
    if len(event.targets) != len(event.values):
        raise ValueError("event targets and values differ in length")
    if len(set(event.targets)) != len(event.targets):
        raise ValueError("event targets must be distinct")
    for t in event.targets:
        if not 0 <= t < limit:
            raise ValueError(f"{event.kind} target {t} out of range")
    if event.kind == "ava":
        for c in event.values:
            if not 0 <= c < instance.n_cities:
                raise ValueError(f"new city {c} out of range")
    elif event.kind == "val":
        if any(s not in (-1, 1) for s in event.values):
            raise ValueError("value signs must be +1 or -1")


def apply_change(instance: TtpInstance, event: ChangeEvent, change_factor: float = 0.02) -> TtpInstance:
    """Return the next-interval instance; ``instance`` itself is untouched.

    Capacity, speeds, drop rate and the drop constant carry over unchanged.
    """
    _check_event(instance, event)
    coords = instance.coords
    distance = instance.distance
    profits = instance.item_profit
    cities = instance.item_city
    if event.kind == "loc":
        coords = coords.copy()
        distance = distance.copy()
        for t, (x, y) in zip(event.targets, event.values):
            coords[t] = (x, y)
        for t in event.targets:
            row = np.hypot(coords[t, 0] - coords[:, 0], coords[t, 1] - coords[:, 1])
            distance[t, :] = row
            distance[:, t] = row
    elif event.kind == "ava":
        cities = cities.copy()
        cities[list(event.targets)] = event.values
    elif event.kind == "val":
        profits = profits.copy()
        idx = list(event.targets)
        profits[idx] = (1 + np.asarray(event.values) * change_factor) * profits[idx]
        if np.any(profits <= 0):
            raise ValueError("value change produced a non-positive profit")
    else:
        raise ValueError(f"unknown change kind {event.kind!r}")
    return make_instance(
        coords,
        profits,
        instance.item_weight,
        cities,
        instance.capacity,
        v_min=instance.v_min,
        v_max=instance.v_max,
        drop_rate=instance.drop_rate,
        drop_constant=instance.drop_constant,
        name=instance.name,
        allow_start_items=True,
        distance=distance,
    )


def instance_sequence(instance: TtpInstance, schedule: ChangeSchedule) -> list[TtpInstance]:
    """The instance of every interval: the base, then one per event."""
    out = [instance]
    for ev in schedule.events:
        out.append(apply_change(out[-1], ev, schedule.config.change_factor))
    return out


# --- schedule files ----------------------------------------------------------
# Files use 1-based city and item ids, like the instance format.


def schedule_to_json(schedule: ChangeSchedule) -> str:
    events = []
    for ev in schedule.events:
        if ev.kind == "loc":
            changes = [{"city": t + 1, "x": x, "y": y} for t, (x, y) in zip(ev.targets, ev.values)]
        elif ev.kind == "ava":
            changes = [{"item": t + 1, "city": c + 1} for t, c in zip(ev.targets, ev.values)]
        else:
            changes = [{"item": t + 1, "sign": s} for t, s in zip(ev.targets, ev.values)]
        events.append({"generation": ev.at_generation, "changes": changes})
    doc = {
        "format": SCHEDULE_FORMAT,
        "kind": schedule.kind,
        "seed": schedule.seed,
        "config": asdict(schedule.config),
        "n_cities": schedule.n_cities,
        "n_items": schedule.n_items,
        "events": events,
    }
    return json.dumps(doc, indent=1) + "\n"


def schedule_from_json(text: str) -> ChangeSchedule:
    doc = json.loads(text)
    try:
        config = DynamicsConfig(**doc["config"])
        kind = doc["kind"]
        events = []
        for ev in doc["events"]:
            changes = ev["changes"]
            if kind == "loc":
                targets = tuple(int(c["city"]) - 1 for c in changes)
                values = tuple((float(c["x"]), float(c["y"])) for c in changes)
            elif kind == "ava":
                targets = tuple(int(c["item"]) - 1 for c in changes)
                values = tuple(int(c["city"]) - 1 for c in changes)
            elif kind == "val":
                targets = tuple(int(c["item"]) - 1 for c in changes)
                values = tuple(int(c["sign"]) for c in changes)
            else:
                raise ValueError(f"unknown schedule kind {kind!r}")
            events.append(ChangeEvent(int(ev["generation"]), kind, targets, values))
        return ChangeSchedule(
            kind, int(doc["seed"]), config, int(doc["n_cities"]), int(doc["n_items"]), tuple(events)
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed schedule file: {exc}") from exc


def save_schedule(schedule: ChangeSchedule, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(schedule_to_json(schedule))


def load_schedule(path: str | os.PathLike, instance: TtpInstance | None = None) -> ChangeSchedule:
    """Read a schedule file, validating it against ``instance`` when given."""
    with open(path, encoding="utf-8") as fh:
        schedule = schedule_from_json(fh.read())
    if instance is not None:
        schedule.validate(instance)
    return schedule
