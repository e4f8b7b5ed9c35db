"""Online convex optimization with long-term constraints.

Primal-dual algorithms that bound the squared-clipped cumulative constraint
violation, their baselines, the benchmark problems, offline oracles, and the
metrics/CLI harness used to verify the scaling laws empirically.
"""

from .aggregation import logsumexp_aggregate, max_aggregate
from .algorithms import (
    AlgoConfig,
    RunError,
    RunTrace,
    doubling_run,
    make_algorithm,
    projected_ogd_run,
    run,
    theorem1_params,
    tradeoff_eta,
)
from .core import (
    BallDomain,
    ConvexFn,
    clip_pos,
    clipped_subgrad,
    finite_diff_grad,
    lagrangian_grad_x,
    project_ball,
)
from .metrics import RunSummary, fit_slope, positive_points, summarize
from .oracle import (
    OracleError,
    OracleResult,
    grid_oracle,
    offline_solve,
    offline_value,
    project_birkhoff,
)
from .problems import (
    DispatchParams,
    ProblemSpec,
    derive_seed,
    dispatch_problem,
    doubly_stochastic_problem,
    load_demand_csv,
    synthetic_demand,
    toy_problem,
)

__all__ = [
    "AlgoConfig",
    "BallDomain",
    "ConvexFn",
    "DispatchParams",
    "OracleError",
    "OracleResult",
    "ProblemSpec",
    "RunError",
    "RunSummary",
    "RunTrace",
    "clip_pos",
    "clipped_subgrad",
    "derive_seed",
    "dispatch_problem",
    "doubling_run",
    "doubly_stochastic_problem",
    "finite_diff_grad",
    "fit_slope",
    "grid_oracle",
    "lagrangian_grad_x",
    "load_demand_csv",
    "logsumexp_aggregate",
    "make_algorithm",
    "max_aggregate",
    "offline_solve",
    "offline_value",
    "positive_points",
    "project_ball",
    "project_birkhoff",
    "projected_ogd_run",
    "run",
    "summarize",
    "synthetic_demand",
    "theorem1_params",
    "toy_problem",
    "tradeoff_eta",
]

__version__ = "0.1.0"
