"""Dynamic bi-objective Travelling Thief Problem laboratory."""

from .dynamics import (
    ChangeEvent,
    ChangeSchedule,
    DynamicsConfig,
    apply_change,
    feasible_region,
    generate_schedule,
    load_schedule,
    save_schedule,
)
from .evolve import (
    EaConfig,
    Population,
    RunTrace,
    StrategySpec,
    crowding_distance,
    initialize,
    nondominated_sort,
    packing_conservation,
    respond_to_change,
    run_dynamic,
    step_generation,
    strategy,
    tour_conservation,
)
from .instance import (
    Evaluation,
    InfeasibleSolutionError,
    ParseError,
    TtpInstance,
    compute_distances,
    compute_drop_constant,
    current_velocity,
    evaluate,
    evaluate_batch,
    kp_to_packing_plan,
    make_instance,
    read_instance,
    write_instance,
)
from .metrics import NadirPoint, hypervolume, max_spread, nadir, rank_strategies
from .solvers import (
    Solution,
    dp_knapsack,
    expand_to_population,
    greedy_knapsack,
    greedy_tour,
    random_packing,
    random_tour,
    solver_tour,
)

__all__ = [
    "apply_change",
    "ChangeEvent",
    "ChangeSchedule",
    "compute_distances",
    "compute_drop_constant",
    "crowding_distance",
    "current_velocity",
    "dp_knapsack",
    "DynamicsConfig",
    "EaConfig",
    "evaluate",
    "evaluate_batch",
    "Evaluation",
    "expand_to_population",
    "feasible_region",
    "generate_schedule",
    "greedy_knapsack",
    "greedy_tour",
    "hypervolume",
    "InfeasibleSolutionError",
    "initialize",
    "kp_to_packing_plan",
    "load_schedule",
    "make_instance",
    "max_spread",
    "nadir",
    "NadirPoint",
    "nondominated_sort",
    "packing_conservation",
    "ParseError",
    "Population",
    "random_packing",
    "random_tour",
    "rank_strategies",
    "read_instance",
    "respond_to_change",
    "run_dynamic",
    "RunTrace",
    "save_schedule",
    "Solution",
    "solver_tour",
    "step_generation",
    "strategy",
    "StrategySpec",
    "tour_conservation",
    "TtpInstance",
    "write_instance",
]

__version__ = "0.1.0"
