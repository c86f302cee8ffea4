import json

import numpy as np
import pandas as pd
import pytest

from dttp.cli import main
from dttp.dynamics import DynamicsConfig, load_schedule
from dttp.evolve import EaConfig
from dttp.harness import (
    ExperimentPlan,
    InstanceSpec,
    composite_front,
    derive_seed,
    generate_instance,
    load_plan,
    rank_file,
    read_coordinates,
    run_experiment,
    run_static,
    save_plan,
)
from dttp.instance import read_instance
from dttp.metrics import nondominated_mask
from oracles import dominance


@pytest.mark.parametrize("kp_type, per_city", [("A", 1), ("B", 5), ("C", 10)])
def test_item_counts(kp_type, per_city):
    inst = generate_instance(InstanceSpec("berlin52", kp_type))
    assert inst.n_cities == 52
    assert inst.n_items == 51 * per_city
    assert not np.any(inst.item_city == 0)
    assert np.all(np.bincount(inst.item_city, minlength=52)[1:] == per_city)


def test_type_distributions(berlin_a, berlin_b):
    assert np.all(berlin_a.item_profit == berlin_a.item_weight + 100)
    assert berlin_a.item_weight.min() >= 1 and berlin_a.item_weight.max() <= 1000
    assert berlin_b.item_weight.min() >= 1000 and berlin_b.item_weight.max() <= 1010
    c = generate_instance(InstanceSpec("berlin52", "C"))
    assert abs(np.corrcoef(c.item_weight, c.item_profit)[0, 1]) < 0.2


def test_capacity_classes_and_constants():
    for kp_type, cls in (("A", 3), ("B", 6), ("C", 9)):
        inst = generate_instance(InstanceSpec("berlin52", kp_type, seed=2))
        assert inst.capacity == np.floor(cls / 11 * inst.item_weight.sum())
        assert (inst.v_min, inst.v_max, inst.drop_rate) == (0.1, 1.0, 0.9)


def test_generation_is_seeded():
    a = generate_instance(InstanceSpec("berlin52", "C", seed=1))
    b = generate_instance(InstanceSpec("berlin52", "C", seed=1))
    c = generate_instance(InstanceSpec("berlin52", "C", seed=2))
    assert a.same_data(b) and not a.same_data(c)


def test_coordinate_sources(tmp_path):
    bare = tmp_path / "three.txt"
    bare.write_text("1 0 0\n2 3 4\n3 6 0\n")
    name, coords = read_coordinates(bare)
    assert name == "three" and coords.shape == (3, 2)
    tiny = tmp_path / "two.txt"
    tiny.write_text("1 0 0\n2 3 4\n")
    with pytest.raises(ValueError):
        read_coordinates(tiny)
    with pytest.raises(ValueError):
        InstanceSpec("berlin52", "D")


def test_derived_seeds_are_stable_and_distinct():
    assert derive_seed(0, 1, 2, "pS") == derive_seed(0, 1, 2, "pS")
    seeds = {derive_seed(0, k, r, s) for k in range(3) for r in range(3) for s in ("pS", "mN")}
    assert len(seeds) == 18


def _plan(tmp_path, **kw):
    base = dict(
        instance=InstanceSpec("berlin52", "A", seed=1),
        dynamics=DynamicsConfig("val", period=3, n_changes=2),
        n_schedules=2,
        n_repeats=2,
        strategies=("pS", "pR", "mN"),
        seed=7,
        output_dir=str(tmp_path / "out"),
        ea=EaConfig(pop_size=6),
    )
    base.update(kw)
    return ExperimentPlan(**base)


def test_plan_file_round_trip(tmp_path):
    plan = _plan(tmp_path)
    save_plan(plan, tmp_path / "plan.json")
    assert load_plan(tmp_path / "plan.json") == plan
    bad = json.loads((tmp_path / "plan.json").read_text())
    bad["colour"] = "red"
    (tmp_path / "bad.json").write_text(json.dumps(bad))
    with pytest.raises(ValueError):
        load_plan(tmp_path / "bad.json")


def test_plan_validation(tmp_path):
    with pytest.raises(ValueError):
        _plan(tmp_path, n_repeats=0)
    with pytest.raises(ValueError):
        _plan(tmp_path, strategies=("pS", "pS"))
    with pytest.raises(ValueError):
        _plan(tmp_path, strategies=("zz",))


def test_degenerate_plan(tmp_path):
    plan = _plan(tmp_path, n_schedules=1, n_repeats=1, strategies=("mN",))
    out = run_experiment(plan)
    assert [p.name for p in (out / "traces").iterdir()] == ["s00-mN-r00.csv"]
    assert not (out / "ranks.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["notices"] == ["single strategy: ranking skipped"]
    snaps = pd.read_csv(out / "snapshots.csv")
    assert snaps["interval"].tolist() == [0, 1, 2]


def test_full_grid_outputs(tmp_path):
    plan = _plan(tmp_path)
    out = run_experiment(plan)
    assert len(list((out / "traces").glob("*.csv"))) == 2 * 2 * 3
    trace = pd.read_csv(out / "traces" / "s01-pR-r00.csv")
    assert list(trace.columns) == ["run_id", "strategy", "schedule_seed", "generation", "interval",
                                   "hypervolume", "spread"]
    assert len(trace) == 3 * 3 + 1
    snaps = pd.read_csv(out / "snapshots.csv")
    assert list(snaps.columns)[:4] == ["run_id", "interval", "end_hv", "end_spread"]
    assert len(snaps) == 2 * 2 * 3 * 3
    ranks = pd.read_csv(out / "ranks.csv")
    assert list(ranks.columns) == ["strategy", "interval", "metric", "median_rank"]
    assert len(ranks) == 3 * 2 * 2
    profiles = pd.read_csv(out / "profiles.csv")
    assert len(profiles) == 3 * 10
    # every strategy in one schedule replays the same file
    manifest = json.loads((out / "manifest.json").read_text())
    inst = read_instance(out / "instance.ttp")
    for entry in manifest["schedules"]:
        sched = load_schedule(out / entry["file"], inst)
        assert sched.seed == entry["seed"]
    assert manifest["failed"] == []


def test_identical_plans_give_identical_bytes(tmp_path):
    plan = _plan(tmp_path)
    a = run_experiment(plan, tmp_path / "a")
    b = run_experiment(plan, tmp_path / "b")
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    for rel in files:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_parallel_workers_match_serial(tmp_path):
    serial = run_experiment(_plan(tmp_path), tmp_path / "serial")
    parallel = run_experiment(_plan(tmp_path, workers=2), tmp_path / "parallel")
    for name in ("snapshots.csv", "ranks.csv", "profiles.csv"):
        assert (serial / name).read_bytes() == (parallel / name).read_bytes()


def test_rank_file_matches_run_output(tmp_path):
    out = run_experiment(_plan(tmp_path))
    rank_file(out / "snapshots.csv", tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_bytes() == (out / "ranks.csv").read_bytes()
    # a bare four-column snapshot table still ranks through its run ids
    bare = pd.read_csv(out / "snapshots.csv").iloc[:, :4]
    bare.to_csv(tmp_path / "bare.csv", index=False)
    rank_file(tmp_path / "bare.csv", tmp_path / "r2.csv")
    assert (tmp_path / "r2.csv").read_bytes() == (out / "ranks.csv").read_bytes()


def test_static_study(berlin_a):
    res = run_static(berlin_a, "ss", EaConfig(pop_size=10), seed=0, generations=5)
    assert res.final_objectives.shape == (10, 2)
    assert res.tour_conservation.max() == 100.0
    lines = res.to_csv().splitlines()
    assert lines[0] == "combo,index,tour_time,profit,tour_conservation,packing_conservation"
    assert len(lines) == 11
    with pytest.raises(ValueError):
        run_static(berlin_a, "pS")


def test_composite_front_is_mutually_non_dominated(berlin_a):
    results = [run_static(berlin_a, c, EaConfig(pop_size=6), seed=1, generations=3) for c in ("ss", "gg", "rr")]
    front = composite_front(results)
    pts = front[["tour_time", "profit"]].to_numpy()
    assert nondominated_mask(pts).all()
    everything = np.vstack([r.final_objectives for r in results])
    for p in everything:
        if not any((p == q).all() for q in pts):
            assert any(dominance(q, p) for q in pts)


# --- command line ------------------------------------------------------------------


def test_cli_end_to_end(tmp_path, capsys):
    inst = tmp_path / "a.ttp"
    assert main(["gen-instance", "--tsp", "berlin52", "--type", "A", "--seed", "3", "--out", str(inst)]) == 0
    assert read_instance(inst).n_items == 51
    sched = tmp_path / "s.json"
    args = ["gen-schedule", "--instance", str(inst), "--kind", "ava", "--dn", "10", "--period", "4",
            "--changes", "2", "--seed", "9", "--out", str(sched)]
    assert main(args) == 0
    assert len(load_schedule(sched).events) == 2

    plan = _plan(tmp_path, n_schedules=1, n_repeats=1, strategies=("pG", "mN"))
    save_plan(plan, tmp_path / "plan.json")
    assert main(["run", "--plan", str(tmp_path / "plan.json")]) == 0
    out = tmp_path / "out"
    assert (out / "ranks.csv").exists()
    assert main(["rank", "--in", str(out / "snapshots.csv"), "--out", str(tmp_path / "r.csv")]) == 0
    assert (tmp_path / "r.csv").read_bytes() == (out / "ranks.csv").read_bytes()

    static = tmp_path / "static"
    args = ["run-static", "--instance", str(inst), "--combo", "gr", "--seed", "1", "--pop-size", "6",
            "--generations", "2", "--out", str(static)]
    assert main(args) == 0
    assert (static / "static_gr.csv").exists()


@pytest.mark.parametrize(
    "args",
    [
        ["gen-instance", "--tsp", "missing.tsp", "--type", "A", "--out", "x.ttp"],
        ["gen-schedule", "--instance", "missing.ttp", "--kind", "val", "--seed", "1", "--out", "x.json"],
        ["run", "--plan", "missing.json"],
        ["rank", "--in", "missing.csv", "--out", "x.csv"],
    ],
)
def test_cli_reports_failures(tmp_path, monkeypatch, capsys, args):
    monkeypatch.chdir(tmp_path)
    assert main(args) != 0
    assert "error" in capsys.readouterr().err


def test_cli_rejects_bad_schedule_magnitude(tmp_path, capsys):
    inst = tmp_path / "a.ttp"
    main(["gen-instance", "--tsp", "berlin52", "--type", "A", "--out", str(inst)])
    code = main(["gen-schedule", "--instance", str(inst), "--kind", "val", "--dn", "0.5", "--seed", "1",
                 "--out", str(tmp_path / "s.json")])
    assert code != 0
    assert "zero items" in capsys.readouterr().err


def test_cli_usage_errors_exit_nonzero():
    with pytest.raises(SystemExit) as info:
        main(["gen-instance", "--type", "Z"])
    assert info.value.code != 0
