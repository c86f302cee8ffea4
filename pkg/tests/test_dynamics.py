import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dttp.dynamics import (
    ChangeEvent,
    DynamicsConfig,
    apply_change,
    feasible_region,
    generate_schedule,
    instance_sequence,
    item_count,
    load_schedule,
    save_schedule,
    schedule_from_json,
    schedule_to_json,
)
from dttp.instance import compute_distances, make_instance
from helpers import random_instance


def test_region_clamps_at_zero():
    (x_lo, x_hi), _ = feasible_region([(0, 3), (100, 7), (40, 5)])
    assert (x_lo, x_hi) == (0.0, 105.0)


def test_region_expands_both_sides():
    (x_lo, x_hi), (y_lo, y_hi) = feasible_region([(50, 0), (150, 10)])
    assert (x_lo, x_hi) == (45.0, 155.0)
    assert (y_lo, y_hi) == (0.0, 10.5)


def test_degenerate_axis_is_a_single_value():
    (x_lo, x_hi), _ = feasible_region([(7, 0), (7, 5), (7, 9)])
    assert x_lo == x_hi == 7.0


def test_item_count_rounds_half_to_even():
    assert item_count(5, 200) == 10
    assert item_count(5, 50) == 2  # 2.5
    assert item_count(5, 70) == 4  # 3.5
    assert item_count(5, 51) == 3  # 2.55


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind="tidal"),
        dict(kind="loc", magnitude=0),
        dict(kind="loc", magnitude=1.5),
        dict(kind="val", magnitude=0),
        dict(kind="val", magnitude=101),
        dict(kind="val", change_factor=1.0),
        dict(kind="ava", period=0),
        dict(kind="ava", n_changes=0),
    ],
)
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ValueError):
        DynamicsConfig(**kwargs)


def test_config_defaults():
    assert DynamicsConfig("Loc").magnitude == 2
    assert DynamicsConfig("VAL").magnitude == 5.0
    c = DynamicsConfig("ava")
    assert (c.change_factor, c.period, c.n_changes) == (0.02, 200, 5)
    assert c.change_generations() == [200, 400, 600, 800, 1000]
    assert c.total_generations == 1200


@pytest.fixture(scope="module")
def inst200():
    rng = np.random.default_rng(0)
    return random_instance(rng, 20, 200)


def test_schedule_is_deterministic(inst200):
    for kind in ("loc", "ava", "val"):
        cfg = DynamicsConfig(kind)
        a = generate_schedule(inst200, cfg, 42)
        b = generate_schedule(inst200, cfg, 42)
        assert schedule_to_json(a) == schedule_to_json(b)


def test_loc_events_move_two_distinct_cities(inst200):
    sched = generate_schedule(inst200, DynamicsConfig("loc"), 1)
    (x_lo, x_hi), (y_lo, y_hi) = feasible_region(inst200.coords)
    for ev in sched.events:
        assert len(set(ev.targets)) == 2
        for x, y in ev.values:
            assert x_lo <= x <= x_hi and y_lo <= y <= y_hi


def test_val_events_carry_ten_pairs_for_200_items(inst200):
    sched = generate_schedule(inst200, DynamicsConfig("val"), 1)
    assert all(len(ev.targets) == 10 for ev in sched.events)
    assert all(set(ev.values) <= {-1, 1} for ev in sched.events)


def test_no_generation_zero_event(inst200):
    sched = generate_schedule(inst200, DynamicsConfig("ava", period=3, n_changes=4), 9)
    assert [ev.at_generation for ev in sched.events] == [3, 6, 9, 12]


def test_percentage_rounding_to_zero_is_a_configuration_error():
    inst = random_instance(np.random.default_rng(1), 5, 4)
    with pytest.raises(ValueError):
        generate_schedule(inst, DynamicsConfig("val", magnitude=5), 0)


def test_loc_magnitude_must_be_below_city_count():
    inst = random_instance(np.random.default_rng(1), 5, 4)
    with pytest.raises(ValueError):
        generate_schedule(inst, DynamicsConfig("loc", magnitude=5), 0)


def _val_instance(profit):
    return make_instance([(0, 0), (0, 4), (3, 0)], [profit, 300], [1, 1], [1, 2], 1)


def test_val_decrease():
    new = apply_change(_val_instance(200), ChangeEvent(1, "val", (0,), (-1,)), 0.02)
    assert new.item_profit[0] == pytest.approx(196)


def test_val_increase():
    new = apply_change(_val_instance(100), ChangeEvent(1, "val", (0,), (1,)), 0.02)
    assert new.item_profit[0] == pytest.approx(102)


def test_changes_leave_the_source_untouched():
    base = _val_instance(100)
    apply_change(base, ChangeEvent(1, "val", (0,), (1,)), 0.02)
    assert base.item_profit[0] == 100


def test_change_keeps_drop_constant(inst200):
    sched = generate_schedule(inst200, DynamicsConfig("loc"), 3)
    for later in instance_sequence(inst200, sched):
        assert later.drop_constant == inst200.drop_constant
        assert later.capacity == inst200.capacity


@pytest.mark.parametrize(
    "event",
    [
        ChangeEvent(1, "val", (5,), (1,)),
        ChangeEvent(1, "ava", (0,), (9,)),
        ChangeEvent(1, "loc", (3,), ((1.0, 1.0),)),
        ChangeEvent(1, "val", (0,), (2,)),
    ],
)
def test_out_of_range_events_rejected(event):
    with pytest.raises(ValueError):
        apply_change(_val_instance(100), event)


def test_non_positive_profit_raises():
    with pytest.raises(ValueError):
        apply_change(_val_instance(100), ChangeEvent(1, "val", (0,), (-1,)), 1.0)


def test_ava_may_move_items_to_the_start_city():
    new = apply_change(_val_instance(100), ChangeEvent(1, "ava", (0,), (0,)))
    assert new.item_city.tolist() == [0, 2]


def test_round_trip(tmp_path, inst200):
    for kind in ("loc", "ava", "val"):
        sched = generate_schedule(inst200, DynamicsConfig(kind, period=7, n_changes=3), 123)
        path = tmp_path / f"{kind}.json"
        save_schedule(sched, path)
        assert load_schedule(path, inst200) == sched


def test_file_uses_one_based_ids(inst200):
    sched = generate_schedule(inst200, DynamicsConfig("ava"), 5)
    doc = schedule_to_json(sched)
    again = schedule_from_json(doc)
    assert again.events[0].targets == sched.events[0].targets
    first = json.loads(doc)["events"][0]["changes"][0]
    assert first["item"] == sched.events[0].targets[0] + 1
    assert first["city"] == sched.events[0].values[0] + 1


def test_wrong_size_instance_rejected(tmp_path, inst200):
    sched = generate_schedule(inst200, DynamicsConfig("val"), 5)
    path = tmp_path / "s.json"
    save_schedule(sched, path)
    other = random_instance(np.random.default_rng(2), 20, 100)
    with pytest.raises(ValueError):
        load_schedule(path, other)


def test_ten_seeds_give_pairwise_distinct_schedules(inst200):
    for kind in ("loc", "ava", "val"):
        texts = {schedule_to_json(generate_schedule(inst200, DynamicsConfig(kind), s)) for s in range(1, 11)}
        assert len(texts) == 10


def test_config_changes_the_stream(inst200):
    a = generate_schedule(inst200, DynamicsConfig("val", change_factor=0.02), 1)
    b = generate_schedule(inst200, DynamicsConfig("val", change_factor=0.03), 1)
    assert a.events != b.events


# --- properties --------------------------------------------------------------

small = st.builds(
    lambda seed, n, m: random_instance(np.random.default_rng(seed), n, m, allow_start_items=True),
    st.integers(0, 2**32 - 1),
    st.integers(4, 12),
    st.integers(20, 60),
)


@settings(max_examples=150)
@given(inst=small, seed=st.integers(0, 2**64 - 1), dn=st.floats(5, 50))
def test_ava_preserves_item_multiset(inst, seed, dn):
    sched = generate_schedule(inst, DynamicsConfig("ava", magnitude=dn, period=1, n_changes=4), seed)
    before = Counter(zip(inst.item_profit.tolist(), inst.item_weight.tolist()))
    for later in instance_sequence(inst, sched)[1:]:
        assert Counter(zip(later.item_profit.tolist(), later.item_weight.tolist())) == before


@settings(max_examples=150)
@given(inst=small, seed=st.integers(0, 2**64 - 1), dn=st.integers(1, 3))
def test_loc_keeps_distances_consistent(inst, seed, dn):
    sched = generate_schedule(inst, DynamicsConfig("loc", magnitude=dn, period=1, n_changes=3), seed)
    prev = inst
    for ev, later in zip(sched.events, instance_sequence(inst, sched)[1:]):
        d = later.distance
        assert np.array_equal(d, d.T)
        assert np.all(np.diag(d) == 0)
        np.testing.assert_allclose(d, compute_distances(later.coords), rtol=0, atol=1e-9)
        untouched = np.setdiff1d(np.arange(inst.n_cities), ev.targets)
        assert np.array_equal(d[np.ix_(untouched, untouched)], prev.distance[np.ix_(untouched, untouched)])
        prev = later


@settings(max_examples=150)
@given(inst=small, seed=st.integers(0, 2**64 - 1), k=st.integers(1, 8), cf=st.floats(0.001, 0.5))
def test_val_drift_bounds(inst, seed, k, cf):
    sched = generate_schedule(inst, DynamicsConfig("val", magnitude=30, change_factor=cf, period=1, n_changes=k), seed)
    final = instance_sequence(inst, sched)[-1]
    p0 = inst.item_profit
    assert np.all(final.item_profit >= p0 * (1 - cf) ** k * (1 - 1e-12))
    assert np.all(final.item_profit <= p0 * (1 + cf) ** k * (1 + 1e-12))


@settings(max_examples=100)
@given(inst=small, seed=st.integers(0, 2**64 - 1), kind=st.sampled_from(["loc", "ava", "val"]))
def test_regeneration_is_identical(inst, seed, kind):
    cfg = DynamicsConfig(kind, period=2, n_changes=3)
    assert schedule_to_json(generate_schedule(inst, cfg, seed)) == schedule_to_json(generate_schedule(inst, cfg, seed))
