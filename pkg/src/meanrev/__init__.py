"""Optimal dynamic trading of correlated mean-reverting assets.

Solves the matrix Riccati ODEs behind the power-utility portfolio problem
for correlated Ornstein-Uhlenbeck assets, evaluates the optimal position
rule and value function, simulates wealth paths, and quantifies the cost
of parameter misspecification through a moment-generating ODE framework.
"""

from .model import (
    NormalizationRecord,
    OUParams,
    Preferences,
    normalize,
    ou_exact_step,
    step_covariance,
    validate,
)
from .riccati import (
    RiccatiSolution,
    SolutionKind,
    StepControl,
    d_common_kappa,
    d_scalar_closed_form,
    d_single_mr,
    d_uncorrelated,
    ric_operator_A,
    ric_operator_D,
    solve_A,
    solve_D,
)
from .control import (
    StrategyKind,
    StrategySpec,
    ValueReport,
    log_utility_value,
    optimal_position,
    optimal_strategy,
    solve_value,
    value_at_mean,
    value_function,
)
from .wealth import SimulationEnsemble, WealthDecomposition, decompose, simulate
from .misspec import (
    EstimatedParams,
    MomentReport,
    misspec_sweep,
    misspecified_strategy,
    p_epsilon,
    sharpe,
    solve_Q,
)
from .analysis import (
    CorrSensitivityReport,
    corr_sensitivity,
    d_curve_1d,
    lambda_closed_form,
    matrix_calculus_checks,
    phi_diagonal,
    psi_closed_form,
    psi_integral,
    solve_F,
    value_vs_kappa2_rho,
)
from .grids import SensitivityGrid

__version__ = "0.1.0"
