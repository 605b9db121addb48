"""Fitness-level analysis of elitist evolutionary algorithms.

Exact hitting times of absorbing chains, coefficient tables bounding hitting
probabilities, the linear time bounds built from them, and a knapsack
benchmark comparing feasibility rules against greedy repair.
"""

__version__ = "0.1.0"

from .bounds import (
    UNBOUNDED,
    BoundReport,
    compare_algorithms,
    lower_time_bound,
    typed_bounds,
    upper_time_bound,
    verify_drift_inequality,
)
from .chain import (
    LevelGraph,
    LevelPartition,
    LevelStats,
    Path,
    StateChain,
    build_level_graph,
    build_level_partition,
    conditional_transition,
    level_stats,
    load_chain,
    save_chain,
    select_path,
    validate_chain,
)
from .coeffs import (
    CoefficientTable,
    allpath_coeffs,
    coefficient_table,
    coeffs_reverse,
    conditional_drift,
    dominance_check,
    lower_coeffs_forward,
    path_lower_coeffs,
    path_upper_coeffs,
    random_init_coeffs,
    type_c_coeff,
    type_cl_coeffs,
    upper_coeffs_forward,
)
from .errors import ChainError, ConvergenceError, DriftLabError, GuardError, PathError, SingularSystemError
from .knapsack import (
    KnapsackInstance,
    build_full_chain,
    build_lumped_chain,
    classify,
    evaluate,
    greedy_repair,
    make_instance,
)
from .oracle import (
    HittingProfile,
    decompose_hitting_time,
    hitting_probabilities,
    mean_exit_time,
    mean_hitting_time,
)
from .sim import SimEstimate, estimate_hitting_time, mutate, step_feasibility_rules, step_greedy_repair
