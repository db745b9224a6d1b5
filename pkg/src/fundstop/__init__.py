"""Optimal stopping of a symmetric random walk with path-extreme rewards.

The reward of stopping depends on the walk's running minimum, current value
and running maximum; the shipped reward is a hedge-fund fee model (management
fee on assets under management plus performance fee over basis levels).  The
solver fills a value tensor cell by cell via least-concave-majorant line
problems, extracts stopping barriers, and validates itself by seeded
Monte-Carlo simulation and grid-refinement bounds.
"""

from .engine import (
    BarrierField,
    GridSpec,
    StateTensor,
    build_current_level_reward,
    build_reward_tensor,
    build_running_max_reward,
    full_chain_oracle,
    query,
    solve,
)
from .fees import (
    FeeModelError,
    FeeParams,
    FundState,
    ProfileSpec,
    aum,
    big_phi,
    management_fee,
    performance_fee,
    phi,
    reward,
    reward_many,
)
from .montecarlo import (
    ConvergenceReport,
    McConfig,
    PolicyStats,
    PolicyValidationError,
    convergence_study,
    max_reward_slope,
    simulate_policy,
)
from .stopline import (
    TIE_TOL,
    LineProblem,
    LineSolution,
    least_concave_majorant,
    solve_line,
    value_iteration_oracle,
)

__version__ = "0.1.0"

__all__ = [
    "BarrierField",
    "ConvergenceReport",
    "FeeModelError",
    "FeeParams",
    "FundState",
    "GridSpec",
    "LineProblem",
    "LineSolution",
    "McConfig",
    "PolicyStats",
    "PolicyValidationError",
    "ProfileSpec",
    "StateTensor",
    "TIE_TOL",
    "aum",
    "big_phi",
    "build_current_level_reward",
    "build_reward_tensor",
    "build_running_max_reward",
    "convergence_study",
    "full_chain_oracle",
    "least_concave_majorant",
    "management_fee",
    "max_reward_slope",
    "performance_fee",
    "phi",
    "query",
    "reward",
    "reward_many",
    "simulate_policy",
    "solve",
    "solve_line",
    "value_iteration_oracle",
]
