"""Compare component constructors and the initial populations they seed."""

import numpy as np

from dttp.evolve import EaConfig, initialize
from dttp.harness import InstanceSpec, generate_instance
from dttp.instance import tour_length
from dttp.metrics import hypervolume, nadir
from dttp.solvers import dp_knapsack, greedy_knapsack, greedy_tour, random_tour, solver_tour

inst = generate_instance(InstanceSpec("berlin52", "A", seed=0))
rng = np.random.default_rng(0)

print("tour lengths:")
print(f"  nearest neighbour {tour_length(inst.distance, greedy_tour(inst)):9.1f}")
print(f"  2-opt + Or-opt    {tour_length(inst.distance, solver_tour(inst)):9.1f}")
print(f"  random            {tour_length(inst.distance, random_tour(inst, rng)):9.1f}")
print("knapsack profit:")
print(f"  greedy by ratio   {inst.item_profit[greedy_knapsack(inst)].sum():9.0f}")
print(f"  dynamic program   {inst.item_profit[dp_knapsack(inst)].sum():9.0f}")

ref = nadir(inst)
cfg = EaConfig(pop_size=60)
print(f"\nfirst-front hypervolume of initial populations (reference f = {ref.tour_bound:.0f}):")
for sid in ("pS", "pG", "pR", "mC"):
    pop = initialize(sid, inst, cfg, np.random.default_rng(1))
    tags = {str(t): int(c) for t, c in zip(*np.unique(pop.tags, return_counts=True))}
    print(f"  {sid}: hv {hypervolume(pop.first_front(), ref):12.4g}  tags {tags}")
