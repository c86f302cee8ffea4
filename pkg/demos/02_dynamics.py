"""Generate, save and replay change schedules of each kind."""

import tempfile
from pathlib import Path

import numpy as np

from dttp.dynamics import DynamicsConfig, generate_schedule, instance_sequence, load_schedule, save_schedule
from dttp.harness import InstanceSpec, generate_instance

base = generate_instance(InstanceSpec("berlin52", "B", seed=0))

for kind in ("loc", "ava", "val"):
    cfg = DynamicsConfig(kind, period=100, n_changes=3)
    sched = generate_schedule(base, cfg, seed=42)
    seq = instance_sequence(base, sched)
    first = sched.events[0]
    print(f"{kind}: changes at {[e.at_generation for e in sched.events]}, {len(first.targets)} targets each")
    if kind == "loc":
        moved = np.flatnonzero(np.any(seq[1].coords != base.coords, axis=1))
        print("   moved cities:", moved.tolist())
    elif kind == "ava":
        print("   item 0-based ids moved:", list(first.targets)[:5], "...")
    else:
        delta = seq[-1].item_profit / base.item_profit
        print(f"   profit factor after 3 changes: min {delta.min():.4f}, max {delta.max():.4f}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "ava.json"
    sched = generate_schedule(base, DynamicsConfig("ava", period=100, n_changes=3), seed=42)
    save_schedule(sched, path)
    again = load_schedule(path, base)
    print("round trip identical:", again.digest() == sched.digest())
    print(path.read_text()[:200], "...")
