"""One dynamic run per response strategy on a value-change schedule."""

import numpy as np

from dttp.dynamics import DynamicsConfig, generate_schedule
from dttp.evolve import DYNAMIC_STRATEGIES, EaConfig, run_dynamic
from dttp.harness import InstanceSpec, generate_instance

inst = generate_instance(InstanceSpec("berlin52", "B", seed=0))
sched = generate_schedule(inst, DynamicsConfig("val", period=50, n_changes=3), seed=5)

print("end-of-interval hypervolume (x1e3)")
print("strategy " + " ".join(f"{k:>9}" for k in range(4)))
for sid in DYNAMIC_STRATEGIES:
    trace = run_dynamic(inst, sched, sid, EaConfig(pop_size=40), np.random.default_rng(0))
    print(f"{sid:8} " + " ".join(f"{s.hypervolume / 1e3:9.1f}" for s in trace.snapshots))
