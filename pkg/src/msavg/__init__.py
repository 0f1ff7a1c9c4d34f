"""Multiscale SDE averaging studies with reflected backward equations.

Forward: Euler-Maruyama for fast-oscillating and averaged SDEs on coupled
Brownian noise.  Backward: regression Monte Carlo with a proximal reflection
step for variational inequalities driven by a convex potential.  Averaging:
Cesaro coefficient averages, empirical rate tables, epsilon sweeps and a
probabilistic view of the associated PDE pair.
"""

from .averaging import (
    KappaEstimate,
    adaptive_cesaro,
    cesaro_average_drift,
    cesaro_average_diffusion_sq,
    estimate_kappa,
    infer_averaged_drift,
)
from .bsvi import (
    BsviSolution,
    RegressionBasis,
    apriori_bounds,
    monotonicity_check,
    point_value,
    solve_bsvi,
)
from .config import RunConfig, parse_config
from .convex import (
    ConvexFunction,
    custom_scalar,
    eval_phi,
    indicator_box,
    prox,
    prox_point,
    scaled_abs,
    subgradient_gap,
    zero,
)
from .errors import ConfigurationError, MsavgError, NumericError
from .experiments import (
    SweepConfig,
    SweepResult,
    converge_backward,
    example71,
    homogenize_pde,
    rate_sweep_forward,
)
from .forward import (
    ForwardPathBatch,
    euler_averaged,
    euler_multiscale,
    sup_distance_sq,
    terminal_rms_error,
)
from .grids import (
    BrownianBatch,
    TimeGrid,
    aggregate_brownian,
    make_grid,
    refine_brownian,
    sample_brownian,
)
from .scenario import Scenario, builtin_names, get_builtin

__all__ = [
    "BrownianBatch", "BsviSolution", "ConfigurationError", "ConvexFunction",
    "ForwardPathBatch", "KappaEstimate", "MsavgError", "NumericError",
    "RegressionBasis", "RunConfig", "Scenario", "SweepConfig", "SweepResult",
    "TimeGrid", "adaptive_cesaro", "aggregate_brownian", "apriori_bounds",
    "builtin_names", "cesaro_average_diffusion_sq", "cesaro_average_drift",
    "converge_backward", "custom_scalar", "estimate_kappa", "euler_averaged",
    "euler_multiscale", "eval_phi", "example71", "get_builtin",
    "homogenize_pde", "indicator_box", "infer_averaged_drift", "make_grid",
    "monotonicity_check", "parse_config", "point_value", "prox", "prox_point",
    "rate_sweep_forward", "refine_brownian", "sample_brownian", "scaled_abs",
    "solve_bsvi", "subgradient_gap", "sup_distance_sq", "terminal_rms_error",
    "zero",
]
