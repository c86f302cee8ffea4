"""Evaluate one tour and packing plan by hand, then on a generated 52-city instance."""

import numpy as np

from dttp.harness import InstanceSpec, generate_instance
from dttp.instance import evaluate, format_instance, make_instance
from dttp.solvers import greedy_knapsack, greedy_tour

# three cities, one heavy item at city 1
tiny = make_instance([(0, 0), (0, 4), (3, 0)], profits=[100], weights=[10], item_city=[1], capacity=10)
ev = evaluate(tiny, [0, 1, 2], [True])
print(f"drop constant C = {tiny.drop_constant:.4f}")
print(f"tour time f = {ev.tour_time:.1f}, final profit g = {ev.final_profit:.4f}")
print("without the item:", evaluate(tiny, [0, 1, 2], [False]))
print()
print(format_instance(tiny))

berlin = generate_instance(InstanceSpec("berlin52", "A", seed=0))
tour, picks = greedy_tour(berlin), greedy_knapsack(berlin)
ev = evaluate(berlin, tour, picks)
print(f"{berlin.name}: {berlin.n_cities} cities, {berlin.n_items} items, W = {berlin.capacity:.0f}")
print(f"greedy tour + greedy packing ({picks.sum()} items): f = {ev.tour_time:.1f}, g = {ev.final_profit:.1f}")
# carrying nothing gives the fastest possible run of this tour
print(f"empty knapsack: f = {evaluate(berlin, tour, np.zeros(berlin.n_items, bool)).tour_time:.1f}")
