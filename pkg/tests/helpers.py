import numpy as np

from dttp import make_instance


def random_instance(rng, n_cities, n_items, capacity_share=0.5, allow_start_items=False):
    """Small instance with integer data on distinct grid points."""
    cells = rng.choice(400, size=n_cities, replace=False)
    coords = np.column_stack([cells % 20, cells // 20]).astype(float) * 5
    weights = rng.integers(1, 30, n_items)
    profits = rng.integers(1, 100, n_items)
    low = 0 if allow_start_items else 1
    cities = rng.integers(low, n_cities, n_items)
    capacity = max(1.0, float(np.floor(capacity_share * weights.sum())))
    return make_instance(coords, profits, weights, cities, capacity, allow_start_items=allow_start_items)
