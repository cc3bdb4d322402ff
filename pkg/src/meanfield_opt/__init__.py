"""Mean-field random-link matching and TSP: order-parameter equations, finite-penalty
theory, recursion on the Poisson weighted infinite tree, and exact small-n oracles."""
from .cavity import (
    MATCHING,
    TSP,
    Kernel,
    OrderParameterCurve,
    curve_area,
    fixed_point_g0,
    get_kernel,
    ground_state_energy,
    lambda_map,
    solve_order_parameter,
    tsp_constant_from_lambda,
    tsp_domain_length,
    tsp_finite_lambda_curve,
    verify_consistency,
)
from .diluted import (
    DilutedMatchingModel,
    h_matching,
    lambda_from_q,
    limit_distribution,
    limit_F,
    limit_F_quantile,
    longest_edge_limit,
    matching_edge_cost,
    q_from_lambda,
    total_diluted_cost,
)
from .errors import CapacityError, ContractError, DomainError, NumericError, PrecisionWarning
from .oracle import (
    EnsembleSummary,
    SolutionRecord,
    WeightedCompleteGraph,
    brute_force_diluted_matching,
    brute_force_tsp,
    ensemble_stats,
    held_karp_tsp,
    min_diluted_matching,
    min_diluted_two_factor,
    sample_instance,
)
from .popdyn import (
    AlternatingRun,
    Population,
    atom_fraction,
    ks_distance,
    popdyn_step,
    run_alternating,
    run_chain,
)
from .recursion import (
    GridDistribution,
    IterationResult,
    IterationTrace,
    Mode,
    cost_from_F,
    expectation,
    init_boundary,
    iterate_step,
    run_iteration,
)

__version__ = "0.1.0"
