"""TTP instances, bi-objective evaluation and the competition-style file format.

In memory, cities and items are addressed by 0-based indices: city 0 is the
start city (id 1 in files), and a tour is an integer array that begins with 0.
A packing plan is a boolean mask over items; each picked item is collected at
its current city.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

DEFAULT_V_MIN = 0.1
DEFAULT_V_MAX = 1.0
DEFAULT_DROP_RATE = 0.9
DROP_RATIO = 0.45
CEIL_SNAP = 1e-12


class InfeasibleSolutionError(ValueError):
    """Raised for tours that are not permutations or plans over capacity."""


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class City(NamedTuple):
    id: int
    x: float
    y: float


class Item(NamedTuple):
    id: int
    profit: float
    weight: float
    city: int


class Evaluation(NamedTuple):
    tour_time: float
    final_profit: float
    knapsack_weight: float


def compute_distances(coords) -> np.ndarray:
    """Full symmetric Euclidean distance matrix (not TSPLIB-rounded)."""
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise ValueError(f"coordinates must have shape (N, 2), got {coords.shape}")
    if len(coords) < 3:
        raise ValueError("at least 3 cities are required")
    if not np.all(np.isfinite(coords)):
        raise ValueError("city coordinates must be finite")
    dx = coords[:, None, 0] - coords[None, :, 0]
    dy = coords[:, None, 1] - coords[None, :, 1]
    return np.hypot(dx, dy)


def min_offdiagonal(distance: np.ndarray) -> float:
    n = len(distance)
    return float(distance[~np.eye(n, dtype=bool)].min())


def compute_drop_constant(
    distance,
    profits,
    v_min: float = DEFAULT_V_MIN,
    drop_rate: float = DEFAULT_DROP_RATE,
    r: float = DROP_RATIO,
) -> float:
    """Time constant C of the profit decay ``p * Dr**ceil(T / C)``.

    C = ln(Dr) * E_t / (v_min * ln(r * l / u)) where E_t is the shortest
    inter-city distance and l, u the smallest and largest item profit.
    """
    profits = np.asarray(profits, dtype=float)
    if profits.size == 0:
        raise ValueError("drop constant needs at least one item")
    shortest = min_offdiagonal(np.asarray(distance, dtype=float))
    if shortest <= 0:
        raise ValueError("duplicate city coordinates: shortest distance is zero")
    ratio = r * profits.min() / profits.max()
    if ratio >= 1:
        raise ValueError(f"r*l/u = {ratio} must be < 1")
    return math.log(drop_rate) * shortest / (v_min * math.log(ratio))


def _readonly(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TtpInstance:
    """Immutable bi-objective TTP instance.

    Use :func:`make_instance` to build one; it validates the data and derives
    the distance matrix and the drop constant.
    """

    name: str
    coords: np.ndarray
    item_profit: np.ndarray
    item_weight: np.ndarray
    item_city: np.ndarray
    capacity: float
    v_min: float
    v_max: float
    drop_rate: float
    drop_constant: float
    distance: np.ndarray
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_cities(self) -> int:
        return len(self.coords)

    @property
    def n_items(self) -> int:
        return len(self.item_profit)

    @property
    def cities(self) -> list[City]:
        return [City(i + 1, float(x), float(y)) for i, (x, y) in enumerate(self.coords)]

    @property
    def items(self) -> list[Item]:
        return [
            Item(i + 1, float(p), float(w), int(c) + 1)
            for i, (p, w, c) in enumerate(zip(self.item_profit, self.item_weight, self.item_city))
        ]

    def fingerprint(self) -> str:
        """Content hash, used to memoise per-instance solver results."""
        if "fingerprint" not in self.cache:
            import hashlib

            h = hashlib.sha1()
            for a in (self.coords, self.item_profit, self.item_weight, self.item_city):
                h.update(np.ascontiguousarray(a).tobytes())
            h.update(repr((self.capacity, self.v_min, self.v_max, self.drop_rate)).encode())
            self.cache["fingerprint"] = h.hexdigest()
        return self.cache["fingerprint"]

    def same_data(self, other: TtpInstance) -> bool:
        return (
            self.name == other.name
            and np.array_equal(self.coords, other.coords)
            and np.array_equal(self.item_profit, other.item_profit)
            and np.array_equal(self.item_weight, other.item_weight)
            and np.array_equal(self.item_city, other.item_city)
            and (self.capacity, self.v_min, self.v_max, self.drop_rate, self.drop_constant)
            == (other.capacity, other.v_min, other.v_max, other.drop_rate, other.drop_constant)
        )


def make_instance(
    coords,
    profits,
    weights,
    item_city,
    capacity: float,
    *,
    v_min: float = DEFAULT_V_MIN,
    v_max: float = DEFAULT_V_MAX,
    drop_rate: float = DEFAULT_DROP_RATE,
    drop_constant: float | None = None,
    name: str = "ttp",
    allow_start_items: bool = False,
    distance: np.ndarray | None = None,
) -> TtpInstance:
    """Validate raw arrays and build a :class:`TtpInstance`.

    ``item_city`` holds 0-based city indices. Items on the start city are
    rejected unless ``allow_start_items`` (availability changes may move items
    there). ``drop_constant`` is derived when not given.
    """
    coords = np.asarray(coords, dtype=float)
    if distance is None:
        distance = compute_distances(coords)
    if np.any(coords < 0):
        raise ValueError("city coordinates must be non-negative")
    profits = np.asarray(profits, dtype=float)
    weights = np.asarray(weights, dtype=float)
    item_city = np.asarray(item_city, dtype=np.int64)
    if not (profits.shape == weights.shape == item_city.shape) or profits.ndim != 1:
        raise ValueError("profits, weights and item_city must be 1-D arrays of equal length")
    if profits.size == 0:
        raise ValueError("an instance needs at least one item")
    if not (np.all(np.isfinite(profits)) and np.all(profits > 0)):
        raise ValueError("item profits must be finite and positive")
    if not (np.all(np.isfinite(weights)) and np.all(weights > 0)):
        raise ValueError("item weights must be finite and positive")
    n = len(coords)
    if np.any(item_city < 0) or np.any(item_city >= n):
        raise ValueError("item assigned to an unknown city")
    if not allow_start_items and np.any(item_city == 0):
        raise ValueError("the start city must not hold items")
    if not 0 < v_min < v_max:
        raise ValueError("speeds must satisfy 0 < v_min < v_max")
    if not 0 < drop_rate < 1:
        raise ValueError("drop rate must lie in (0, 1)")
    if not (math.isfinite(capacity) and capacity > 0):
        raise ValueError("capacity must be positive")
    if drop_constant is None:
        drop_constant = compute_drop_constant(distance, profits, v_min, drop_rate)
    if not drop_constant > 0:
        raise ValueError("drop constant must be positive")
    return TtpInstance(
        name=name,
        coords=_readonly(coords, float),
        item_profit=_readonly(profits, float),
        item_weight=_readonly(weights, float),
        item_city=_readonly(item_city, np.int64),
        capacity=float(capacity),
        v_min=float(v_min),
        v_max=float(v_max),
        drop_rate=float(drop_rate),
        drop_constant=float(drop_constant),
        distance=_readonly(distance, float),
    )


def current_velocity(weight, instance: TtpInstance):
    """Speed with ``weight`` in the knapsack; linear from v_max (empty) to v_min (full)."""
    w = np.asarray(weight, dtype=float)
    if np.any(w < 0) or np.any(w > instance.capacity):
        raise InfeasibleSolutionError(f"knapsack weight {weight} outside [0, {instance.capacity}]")
    v = instance.v_max - w * (instance.v_max - instance.v_min) / instance.capacity
    return float(v) if np.ndim(v) == 0 else v


def decay_exponent(carry_time, drop_constant: float) -> np.ndarray:
    """``ceil(T / C)`` with near-integer quotients snapped first."""
    q = np.asarray(carry_time, dtype=float) / drop_constant
    nearest = np.rint(q)
    q = np.where(np.abs(q - nearest) <= CEIL_SNAP * np.maximum(1.0, np.abs(q)), nearest, q)
    return np.ceil(q)


def check_tours(tours: np.ndarray, n_cities: int) -> None:
    tours = np.atleast_2d(tours)
    if tours.shape[1] != n_cities:
        raise InfeasibleSolutionError(f"tour length {tours.shape[1]} != {n_cities} cities")
    if np.any(tours[:, 0] != 0):
        raise InfeasibleSolutionError("tours must start at the first city")
    if not np.array_equal(np.sort(tours, axis=1), np.broadcast_to(np.arange(n_cities), tours.shape)):
        raise InfeasibleSolutionError("tour is not a permutation of the cities")


def _item_city_matrix(instance: TtpInstance) -> np.ndarray:
    key = "item_city_matrix"
    if key not in instance.cache:
        onehot = np.zeros((instance.n_items, instance.n_cities))
        onehot[np.arange(instance.n_items), instance.item_city] = 1.0
        instance.cache[key] = onehot
    return instance.cache[key]


def evaluate_batch(instance: TtpInstance, tours, picks) -> np.ndarray:
    """Evaluate many solutions at once.

    Args:
        tours: (P, N) integer array of 0-based city indices, each starting at 0.
        picks: (P, m) boolean packing masks.

    Returns:
        (P, 2) array of ``[tour_time, final_profit]``.
    """
    tours = np.atleast_2d(np.asarray(tours, dtype=np.int64))
    picks = np.atleast_2d(np.asarray(picks, dtype=bool))
    n, m = instance.n_cities, instance.n_items
    check_tours(tours, n)
    if picks.shape != (len(tours), m):
        raise InfeasibleSolutionError(f"packing mask shape {picks.shape} != ({len(tours)}, {m})")
    picked_w = picks * instance.item_weight
    total_w = picked_w.sum(axis=1)
    if np.any(total_w > instance.capacity):
        raise InfeasibleSolutionError("packing plan exceeds the knapsack capacity")

    rows = np.arange(len(tours))[:, None]
    city_load = picked_w @ _item_city_matrix(instance)
    # weight carried when leaving each tour position
    carried = np.cumsum(city_load[rows, tours], axis=1)
    speed = instance.v_max - carried * ((instance.v_max - instance.v_min) / instance.capacity)
    legs = instance.distance[tours, np.roll(tours, -1, axis=1)]
    leg_time = legs / speed
    elapsed = np.cumsum(leg_time, axis=1)
    total = elapsed[:, -1]
    departure = elapsed - leg_time

    position = np.empty_like(tours)
    position[rows, tours] = np.arange(n)
    carry = total[:, None] - departure[rows, position[:, instance.item_city]]
    factor = instance.drop_rate ** decay_exponent(carry, instance.drop_constant)
    profit = np.where(picks, instance.item_profit * factor, 0.0).sum(axis=1)
    return np.column_stack([total, profit])


def evaluate(instance: TtpInstance, tour, picks) -> Evaluation:
    """Tour time and end-of-tour profit for one (tour, packing plan) pair."""
    tour = np.asarray(tour, dtype=np.int64)
    picks = np.asarray(picks, dtype=bool)
    f, g = evaluate_batch(instance, tour[None, :], picks[None, :])[0]
    return Evaluation(float(f), float(g), float(instance.item_weight[picks].sum()))


def kp_to_packing_plan(selection, instance: TtpInstance) -> np.ndarray:
    """Turn a set of 0-based item indices into a packing mask.

    Each item is collected at its current city, so the mask alone carries the
    plan; the city assignment is read from the instance at evaluation time.
    """
    mask = np.zeros(instance.n_items, dtype=bool)
    idx = np.fromiter(selection, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= instance.n_items):
        raise ValueError("selection references an unknown item")
    mask[idx] = True
    if instance.item_weight[mask].sum() > instance.capacity:
        raise InfeasibleSolutionError("selection exceeds the knapsack capacity")
    return mask


def tour_length(distance: np.ndarray, tour) -> float:
    tour = np.asarray(tour)
    return float(distance[tour, np.roll(tour, -1)].sum())


# --- file format -----------------------------------------------------------

_HEADER_KEYS = {
    "PROBLEM NAME": "name",
    "DIMENSION": "dimension",
    "NUMBER OF ITEMS": "n_items",
    "CAPACITY OF KNAPSACK": "capacity",
    "MIN SPEED": "v_min",
    "MAX SPEED": "v_max",
    "DROP RATE": "drop_rate",
    "DROP CONSTANT": "drop_constant",
}
_REQUIRED = ("dimension", "n_items", "capacity", "v_min", "v_max", "drop_rate")


def _fmt(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() and abs(x) < 1e15 else repr(x)


def format_instance(instance: TtpInstance) -> str:
    lines = [
        f"PROBLEM NAME: {instance.name}",
        f"DIMENSION: {instance.n_cities}",
        f"NUMBER OF ITEMS: {instance.n_items}",
        f"CAPACITY OF KNAPSACK: {_fmt(instance.capacity)}",
        f"MIN SPEED: {_fmt(instance.v_min)}",
        f"MAX SPEED: {_fmt(instance.v_max)}",
        f"DROP RATE: {_fmt(instance.drop_rate)}",
        f"DROP CONSTANT: {_fmt(instance.drop_constant)}",
        "NODE_COORD_SECTION (INDEX, X, Y):",
    ]
    lines += [f"{i + 1} {_fmt(x)} {_fmt(y)}" for i, (x, y) in enumerate(instance.coords)]
    lines.append("ITEMS SECTION (INDEX, PROFIT, WEIGHT, ASSIGNED NODE NUMBER):")
    lines += [
        f"{i + 1} {_fmt(p)} {_fmt(w)} {c + 1}"
        for i, (p, w, c) in enumerate(zip(instance.item_profit, instance.item_weight, instance.item_city))
    ]
    lines.append("EOF")
    return "\n".join(lines) + "\n"


def write_instance(instance: TtpInstance, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_instance(instance))


def _number(token: str, lineno: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"{what}: expected a number, got {token!r}", lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"{what}: non-finite value {token!r}", lineno)
    return value


def _integer(token: str, lineno: int, what: str) -> int:
    value = _number(token, lineno, what)
    if not value.is_integer():
        raise ParseError(f"{what}: expected an integer, got {token!r}", lineno)
    return int(value)


def parse_instance(text: str, *, check_drop_constant: bool = True) -> TtpInstance:
    """Parse competition-style instance text.

    When a ``DROP CONSTANT`` is present and ``check_drop_constant`` is set, it
    must agree with the value recomputed from the data to within 1e-9.
    Instances written after location or value changes keep their original
    constant and must be read with ``check_drop_constant=False``.
    """
    header: dict = {}
    coords: list[tuple[float, float]] = []
    items: list[tuple[float, float, int]] = []
    section = None
    seen_eof = False
    last = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        last = lineno
        line = raw.strip()
        if not line:
            continue
        upper = line.upper()
        if upper == "EOF":
            seen_eof = True
            break
        if upper.startswith("NODE_COORD_SECTION"):
            section = "nodes"
            continue
        if upper.startswith("ITEMS SECTION"):
            section = "items"
            continue
        if ":" in line and section is None:
            key, _, value = line.partition(":")
            key = key.strip().upper()
            if key in _HEADER_KEYS:
                field_name = _HEADER_KEYS[key]
                value = value.strip()
                if field_name == "name":
                    header[field_name] = value
                elif field_name in ("dimension", "n_items"):
                    header[field_name] = _integer(value, lineno, key)
                else:
                    header[field_name] = _number(value, lineno, key)
            # unknown header keys (e.g. KNAPSACK DATA TYPE) are ignored
            continue
        parts = line.split()
        if section == "nodes":
            if len(parts) != 3:
                raise ParseError("coordinate rows need 'id x y'", lineno)
            idx = _integer(parts[0], lineno, "city id")
            if idx != len(coords) + 1:
                raise ParseError(f"city ids must be consecutive from 1, got {idx}", lineno)
            coords.append((_number(parts[1], lineno, "x"), _number(parts[2], lineno, "y")))
        elif section == "items":
            if len(parts) != 4:
                raise ParseError("item rows need 'id profit weight city'", lineno)
            idx = _integer(parts[0], lineno, "item id")
            if idx != len(items) + 1:
                raise ParseError(f"item ids must be consecutive from 1, got {idx}", lineno)
            city = _integer(parts[3], lineno, "item city")
            if "dimension" in header and not 1 <= city <= header["dimension"]:
                raise ParseError(f"item {idx} references unknown city {city}", lineno)
            items.append((_number(parts[1], lineno, "profit"), _number(parts[2], lineno, "weight"), city - 1))
        else:
            raise ParseError(f"unexpected line {line!r}", lineno)

    for key in _REQUIRED:
        if key not in header:
            raise ParseError(f"missing header field for {key}")
    if not coords:
        raise ParseError("missing NODE_COORD_SECTION")
    if not items:
        raise ParseError("missing ITEMS SECTION")
    if not seen_eof:
        raise ParseError("missing EOF terminator", last)
    if header["dimension"] != len(coords):
        raise ParseError(f"DIMENSION {header['dimension']} disagrees with {len(coords)} coordinate rows")
    if header["n_items"] != len(items):
        raise ParseError(f"NUMBER OF ITEMS {header['n_items']} disagrees with {len(items)} item rows")

    profits, weights, cities = (np.array(col) for col in zip(*items))
    stored = header.get("drop_constant")
    try:
        inst = make_instance(
            coords,
            profits,
            weights,
            cities,
            header["capacity"],
            v_min=header["v_min"],
            v_max=header["v_max"],
            drop_rate=header["drop_rate"],
            drop_constant=None if check_drop_constant else stored,
            name=header.get("name", "ttp"),
            allow_start_items=True,
        )
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    if stored is not None and check_drop_constant:
        if abs(stored - inst.drop_constant) > 1e-9 * max(1.0, abs(stored)):
            raise ParseError(
                f"DROP CONSTANT {stored} disagrees with recomputed value {inst.drop_constant}"
            )
        if stored != inst.drop_constant:
            inst = make_instance(
                inst.coords, inst.item_profit, inst.item_weight, inst.item_city, inst.capacity,
                v_min=inst.v_min, v_max=inst.v_max, drop_rate=inst.drop_rate,
                drop_constant=stored, name=inst.name, allow_start_items=True,
                distance=inst.distance,
            )
    return inst


def read_instance(path: str | os.PathLike, *, check_drop_constant: bool = True) -> TtpInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read(), check_drop_constant=check_drop_constant)
