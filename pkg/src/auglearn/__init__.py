"""Augmented Lagrangian dual ascent for risk-constrained learning.

Core pieces: constrained problems over parameter domains (``problems``), the
shifted quadratic penalty and Lagrangians (``auglag``), the increased-shifted
penalty solver and its baseline (``ascent``), brute-force duality oracles
(``oracle``), a small MLP with fairness risks (``models``), tabular data
handling (``data``), generalization bounds (``pacc``), and a CLI (``cli``).
"""

from .auglag import (
    DualState,
    augmented_lagrangian,
    augmented_lagrangian_grad,
    penalty_kernel,
    scaled_penalty,
    standard_lagrangian,
)
from .ascent import (
    AscentConfig,
    DivergenceError,
    InnerSolverConfig,
    SolveResult,
    TrainingTrace,
    inner_solve,
    randomized_predictor,
    solve_augmented,
    solve_standard,
    update_multipliers,
    update_penalty,
)
from .oracle import (
    DualityReport,
    GridSpec,
    InfeasibleGridError,
    brute_force_minimum,
    dual_surface,
    duality_report,
    licq_check,
    perturbation_function,
    perturbation_table,
    second_order_stability_check,
    sosc_check,
)
from .models import (
    FairnessConstraintSpec,
    FlipTransform,
    Mlp,
    accuracy,
    counterfactual_flip_rate,
    cross_entropy_risk,
    kl_fairness_risk,
)
from .pacc import (
    LocationFamily,
    PaccBound,
    empirical_pacc_harness,
    hoeffding_radius,
    pacc_bounds,
)
from .problems import (
    BUILTIN_PROBLEMS,
    AnalyticRisk,
    ConstrainedProblem,
    EmpiricalRisk,
    GradientUnavailableError,
    ParamDomain,
    RiskFunctional,
    evaluate_risks,
    nonconvex_1d,
    risk_gradient,
    toy_qp,
)

__version__ = "0.1.0"
