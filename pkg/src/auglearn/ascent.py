"""Dual ascent with geometrically increased, multiplier-shifted penalties.

``solve_augmented`` runs the increased-shifted penalty method: each outer
iteration approximately minimizes the augmented Lagrangian in theta, shifts
the multipliers through the penalty kernel's slope with step 1/alpha, and
multiplies alpha by a growth factor every fixed number of iterations.
``solve_standard`` is the projected-subgradient baseline on the standard
Lagrangian with a constant dual step.  Both record a full per-iteration trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .auglag import (
    DualState,
    augmented_lagrangian_value_and_grad,
    standard_lagrangian_value_and_grad,
)
from .problems import ConstrainedProblem, as_theta, evaluate_risks


class DivergenceError(RuntimeError):
    """Inner minimization produced a non-finite value or iterate."""


@dataclass
class InnerSolverConfig:
    """Approximate minimizer of the (augmented) Lagrangian in theta.

    ``method`` is plain gradient descent or heavy-ball momentum.  With
    ``line_search`` on, each gradient-descent step backtracks (halving from
    ``step_size``) until the value decreases, which keeps the solver stable as
    the penalty level grows.  ``restarts`` > 0 adds that many extra
    deterministic low-discrepancy starting points and returns the best run,
    approximating a global minimum on low-dimensional nonconvex problems.
    """

    method: str = "gradient-descent"
    step_size: float = 0.1
    max_steps: int = 500
    grad_tol: float = 1e-8
    warm_start: bool = True
    momentum: float = 0.9
    line_search: bool = True
    restarts: int = 0
    restart_radius: float = 2.0

    def __post_init__(self):
        if self.method not in ("gradient-descent", "momentum"):
            raise ValueError(f"unknown inner method {self.method!r}")
        if not self.step_size > 0:
            raise ValueError("step size must be positive")
        if self.max_steps < 1:
            raise ValueError("max steps must be >= 1")
        if not self.grad_tol > 0:
            raise ValueError("gradient tolerance must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")


@dataclass
class AscentConfig:
    """Outer-loop configuration for both solvers.

    alpha grows by ``growth_factor`` every ``growth_interval`` outer
    iterations.  The inner stopping tolerance at outer iteration k is
    max(inner.grad_tol, eps0 * eps_decay**k): a nonincreasing schedule that
    tightens the inner gradient-norm stop toward its floor.  ``dual_step`` is
    only used by the standard baseline.  alpha0 should be kept >= 1: the
    multiplier shift uses step 1/alpha, which overshoots for small alpha.
    """

    alpha0: float = 1.0
    lambda0: Optional[np.ndarray] = None
    growth_factor: float = 2.0
    growth_interval: int = 10
    outer_iters: int = 60
    eps0: float = 1e-2
    eps_decay: float = 0.9
    dual_step: float = 0.5
    project_lambda: bool = True
    multiplier_rule: str = "shifted"
    theta0: Optional[np.ndarray] = None
    inner: InnerSolverConfig = field(default_factory=InnerSolverConfig)
    archive_iterates: bool = False
    archive_stride: int = 1
    stop_slack_tol: Optional[float] = None
    stop_lambda_tol: Optional[float] = None

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if not self.growth_factor > 1:
            raise ValueError("growth factor must be > 1")
        if self.growth_interval < 1:
            raise ValueError("growth interval must be >= 1")
        if self.outer_iters < 1:
            raise ValueError("outer iteration count must be >= 1")
        if not 0 < self.eps_decay <= 1:
            raise ValueError("eps_decay must lie in (0, 1]")
        if not self.eps0 > 0:
            raise ValueError("eps0 must be positive")
        if self.dual_step < 0:
            raise ValueError("dual step must be nonnegative")
        if self.multiplier_rule not in ("shifted", "phr"):
            raise ValueError(f"unknown multiplier rule {self.multiplier_rule!r}")
        if self.archive_stride < 1:
            raise ValueError("archive stride must be >= 1")

    def inner_tolerance(self, k: int) -> float:
        return max(self.inner.grad_tol, self.eps0 * self.eps_decay**k)


@dataclass
class TrainingTrace:
    """Per-outer-iteration record of the dual state and primal diagnostics."""

    lam: np.ndarray  # (K, m)
    alpha: np.ndarray  # (K,)
    slacks: np.ndarray  # (K, m)
    objective: np.ndarray  # (K,)
    lagrangian: np.ndarray  # (K,) value of the (augmented) Lagrangian at the iterate
    inner_steps: np.ndarray  # (K,)
    inner_grad_norm: np.ndarray  # (K,)

    def __len__(self) -> int:
        return self.alpha.shape[0]

    def records(self) -> list[dict]:
        """One self-contained dict per outer iteration (the CLI trace schema)."""
        out = []
        for k in range(len(self)):
            out.append(
                {
                    "iter": k,
                    "lambda": [float(v) for v in self.lam[k]],
                    "alpha": float(self.alpha[k]),
                    "slack": [float(v) for v in self.slacks[k]],
                    "objective": float(self.objective[k]),
                    "inner_steps": int(self.inner_steps[k]),
                    "inner_grad_norm": float(self.inner_grad_norm[k]),
                }
            )
        return out


@dataclass
class SolveResult:
    theta: np.ndarray
    dual: DualState
    trace: TrainingTrace
    archive: Optional[list] = None
    termination: str = "outer-iterations-complete"


class InnerResult(NamedTuple):
    theta: np.ndarray
    steps: int
    grad_norm: float
    value: float


def update_multipliers(lam, alpha: float, slacks, project: bool = True, rule: str = "shifted") -> np.ndarray:
    """One multiplier step from the constraint values at the current iterate.

    The "shifted" rule moves lam_i by slack_i/alpha while the shifted penalty
    is active (slack_i >= -lam_i/(2 alpha), with the active branch taken at
    equality) and decays lam_i by 2 lam_i/alpha otherwise.  The "phr" rule is
    the undamped classic shift max(0, lam_i + 2 alpha slack_i).  ``project``
    clamps the result at 0.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    slacks = np.atleast_1d(np.asarray(slacks, dtype=float))
    if lam.shape != slacks.shape:
        raise ValueError(f"shape mismatch: {lam.shape} multipliers, {slacks.shape} slacks")
    if rule == "shifted":
        out = np.where(
            slacks >= -lam / (2.0 * alpha),
            lam + slacks / alpha,
            lam - 2.0 * lam / alpha,
        )
    elif rule == "phr":
        out = np.maximum(0.0, lam + 2.0 * alpha * slacks)
    else:
        raise ValueError(f"unknown multiplier rule {rule!r}")
    if project:
        out = np.maximum(0.0, out)
    return out


def update_penalty(alpha: float, k: int, config: AscentConfig) -> float:
    """alpha * growth_factor when k is a positive multiple of the interval."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if k > 0 and k % config.growth_interval == 0:
        return alpha * config.growth_factor
    return alpha


def _restart_points(start: np.ndarray, problem: ConstrainedProblem, cfg: InnerSolverConfig) -> list[np.ndarray]:
    points = [np.array(start, dtype=float)]
    if cfg.restarts == 0:
        return points
    dom = problem.domain
    sampler = qmc.Halton(d=dom.dimension, scramble=False)
    unit = sampler.random(cfg.restarts)
    if dom.bounded:
        extra = dom.lower + unit * (dom.upper - dom.lower)
    else:
        extra = start + cfg.restart_radius * (2.0 * unit - 1.0)
    points.extend(np.array(row) for row in extra)
    return points


def _descend_once(
    value_and_grad: Callable,
    start: np.ndarray,
    cfg: InnerSolverConfig,
    gtol: float,
    clip: Callable,
) -> InnerResult:
    theta = clip(np.array(start, dtype=float))
    value, grad = value_and_grad(theta)
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise DivergenceError(f"non-finite Lagrangian at the starting point (value={value!r})")
    velocity = np.zeros_like(theta)
    steps = 0
    gnorm = float(np.linalg.norm(grad))
    while steps < cfg.max_steps and gnorm > gtol:
        if cfg.method == "momentum":
            velocity = cfg.momentum * velocity - cfg.step_size * grad
            theta = clip(theta + velocity)
            value, grad = value_and_grad(theta)
        else:
            step = cfg.step_size
            if cfg.line_search:
                new_theta = clip(theta - step * grad)
                new_value, new_grad = value_and_grad(new_theta)
                halvings = 0
                while new_value > value and halvings < 40:
                    step *= 0.5
                    halvings += 1
                    new_theta = clip(theta - step * grad)
                    new_value, new_grad = value_and_grad(new_theta)
                if new_value > value:  # no descent direction progress left
                    steps += 1
                    break
                theta, value, grad = new_theta, new_value, new_grad
            else:
                theta = clip(theta - step * grad)
                value, grad = value_and_grad(theta)
        steps += 1
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            raise DivergenceError(
                f"inner solve diverged after {steps} steps (value={value!r}, "
                f"|theta|={float(np.linalg.norm(theta)):.3e})"
            )
        gnorm = float(np.linalg.norm(grad))
    return InnerResult(theta, steps, gnorm, float(value))


def _descend(value_and_grad, start, problem, cfg: InnerSolverConfig, gtol: float) -> InnerResult:
    clip = problem.domain.clip
    best = None
    total_steps = 0
    for point in _restart_points(start, problem, cfg):
        res = _descend_once(value_and_grad, point, cfg, gtol, clip)
        total_steps += res.steps
        if best is None or res.value < best.value:
            best = res
    return InnerResult(best.theta, total_steps, best.grad_norm, best.value)


def inner_solve(
    problem: ConstrainedProblem,
    dual: DualState,
    start,
    config: InnerSolverConfig,
    gtol: Optional[float] = None,
) -> InnerResult:
    """Approximately minimize the augmented Lagrangian at a fixed dual state."""
    start = as_theta(start, problem.dimension)

    def fg(theta):
        value, grad, _ = augmented_lagrangian_value_and_grad(problem, theta, dual)
        return value, grad

    return _descend(fg, start, problem, config, config.grad_tol if gtol is None else gtol)


def _run_outer_loop(problem, config: AscentConfig, make_fg, update_dual, alpha_trace_value):
    m = problem.m
    lam = (
        np.zeros(m)
        if config.lambda0 is None
        else np.atleast_1d(np.asarray(config.lambda0, dtype=float)).copy()
    )
    if lam.shape[0] != m:
        raise ValueError(f"lambda0 has {lam.shape[0]} entries for {m} constraints")
    alpha = config.alpha0
    theta = (
        problem.domain.center()
        if config.theta0 is None
        else as_theta(config.theta0, problem.dimension)
    )
    start = np.array(theta)
    K = config.outer_iters
    rows_lam = np.empty((K, m))
    rows_alpha = np.empty(K)
    rows_slack = np.empty((K, m))
    rows_obj = np.empty(K)
    rows_lag = np.empty(K)
    rows_steps = np.empty(K, dtype=int)
    rows_gnorm = np.empty(K)
    archive = [] if config.archive_iterates else None
    termination = "outer-iterations-complete"
    used = 0

    def _partial_trace():
        return TrainingTrace(
            lam=rows_lam[:used],
            alpha=rows_alpha[:used],
            slacks=rows_slack[:used],
            objective=rows_obj[:used],
            lagrangian=rows_lag[:used],
            inner_steps=rows_steps[:used],
            inner_grad_norm=rows_gnorm[:used],
        )

    for k in range(K):
        gtol = config.inner_tolerance(k)
        fg, obj_of = make_fg(lam, alpha)
        try:
            res = _descend(fg, start, problem, config.inner, gtol)
        except DivergenceError as e:
            # hand back whatever completed so callers can persist a partial trace
            e.partial_result = SolveResult(
                theta, DualState(lam, alpha), _partial_trace(), archive, "diverged"
            )
            raise
        theta = res.theta
        obj, slacks = obj_of(theta)
        rows_lam[k] = lam
        rows_alpha[k] = alpha_trace_value(alpha)
        rows_slack[k] = slacks
        rows_obj[k] = obj
        rows_lag[k] = res.value
        rows_steps[k] = res.steps
        rows_gnorm[k] = res.grad_norm
        used = k + 1
        if archive is not None and k % config.archive_stride == 0:
            archive.append(np.array(theta))
        new_lam, alpha = update_dual(lam, alpha, slacks, k)
        if not np.all(np.isfinite(new_lam)) or not np.isfinite(alpha):
            raise DivergenceError(f"dual state became non-finite at outer iteration {k}")
        if (
            config.stop_slack_tol is not None
            and config.stop_lambda_tol is not None
            and (m == 0 or float(np.max(slacks, initial=-np.inf)) <= config.stop_slack_tol)
            and float(np.max(np.abs(new_lam - lam), initial=0.0)) <= config.stop_lambda_tol
        ):
            lam = new_lam
            termination = "early-stop"
            break
        lam = new_lam
        if config.inner.warm_start:
            start = np.array(theta)
    return SolveResult(theta, DualState(lam, alpha), _partial_trace(), archive, termination)


def solve_augmented(problem: ConstrainedProblem, config: AscentConfig) -> SolveResult:
    """Increased-shifted penalty method.

    Outer iteration k minimizes the augmented Lagrangian at (lam_k, alpha_k)
    from a warm (or fixed) start, then produces (lam_{k+1}, alpha_{k+1}) from
    the recorded constraint values, so each inner solve uses the freshly
    updated dual state.  With no constraints this reduces to plain
    minimization of the objective.
    """

    def make_fg(lam, alpha):
        dual = DualState(lam, alpha)

        def fg(theta):
            value, grad, _ = augmented_lagrangian_value_and_grad(problem, theta, dual)
            return value, grad

        def obj_of(theta):
            risks = evaluate_risks(problem, theta)
            return float(risks[0]), risks[1:]

        return fg, obj_of

    def update_dual(lam, alpha, slacks, k):
        new_lam = update_multipliers(
            lam, alpha, slacks, project=config.project_lambda, rule=config.multiplier_rule
        )
        return new_lam, update_penalty(alpha, k + 1, config)

    return _run_outer_loop(problem, config, make_fg, update_dual, lambda a: a)


def solve_standard(problem: ConstrainedProblem, config: AscentConfig) -> SolveResult:
    """Projected subgradient ascent baseline on the standard Lagrangian.

    lam_{k+1} = max(0, lam_k + dual_step * slacks); the trace records alpha as
    0 since the inner objective is the unpenalized Lagrangian.
    """

    def make_fg(lam, alpha):
        def fg(theta):
            value, grad, _ = standard_lagrangian_value_and_grad(problem, theta, lam)
            return value, grad

        def obj_of(theta):
            risks = evaluate_risks(problem, theta)
            return float(risks[0]), risks[1:]

        return fg, obj_of

    def update_dual(lam, alpha, slacks, k):
        return np.maximum(0.0, lam + config.dual_step * slacks), alpha

    return _run_outer_loop(problem, config, make_fg, update_dual, lambda a: 0.0)


def randomized_predictor(archive: Sequence, t0: int, seed, apply: Callable):
    """Prediction function that draws an archived iterate uniformly per call.

    Each call picks an index in [t0, len(archive)) from a seeded generator and
    returns ``apply(archive[index], x)``.
    """
    if archive is None or len(archive) == 0:
        raise ValueError("empty iterate archive")
    if not 0 <= t0 < len(archive):
        raise ValueError(f"window start {t0} outside archive of length {len(archive)}")
    rng = np.random.default_rng(seed)
    hi = len(archive)

    def predict(x):
        idx = int(rng.integers(t0, hi))
        return apply(archive[idx], x)

    return predict
