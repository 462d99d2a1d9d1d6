from .explore import (
    DEFAULT_CAP,
    DcimSpec,
    GaParams,
    Genome,
    ParetoArchive,
    enumerate_bruteforce,
    evaluate_grid,
    feasible_grid,
    hypervolume_ratio,
    nsga2_evolve,
    repair_to_feasible,
    sort_key,
)
from .pareto import (
    crowding_distance,
    dominance_matrix,
    dominates,
    fast_nondominated_sort,
    hypervolume,
    nondominated_indices,
    reference_point,
)
