"""Sample-complexity radii, dual-learning generalization bounds, and an
empirical harness measuring both on a synthetic family with a known optimum.

The radii are per-function Hoeffding plug-ins: honest about what they are
(a concentration radius for one fixed predictor, not a uniform bound over the
whole parameter class), which is why the harness reports directional trends
and trial fractions rather than certified coverage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ascent import AscentConfig, DivergenceError, InnerSolverConfig, solve_augmented
from .problems import ConstrainedProblem, EmpiricalRisk, ParamDomain

PLUGIN_NOTE = (
    "zeta radii are single-function Hoeffding plug-ins, not uniform-over-"
    "parameter-class bounds; treat coverage fractions as directional evidence"
)


def hoeffding_radius(loss_range, n: int, delta: float) -> float:
    """(hi - lo) * sqrt(ln(2/delta) / (2n)) for a loss bounded in [lo, hi]."""
    lo, hi = float(loss_range[0]), float(loss_range[1])
    if hi < lo:
        raise ValueError(f"invalid loss range [{lo}, {hi}]")
    if n < 1:
        raise ValueError("sample count must be >= 1")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return (hi - lo) * math.sqrt(math.log(2.0 / delta) / (2.0 * n))


@dataclass
class PaccBound:
    """Optimality/feasibility bounds assembled from dual pairs and radii.

    optimality_bound = (2 + delta_lambda) * zeta_bar + delta_alpha * m * zeta_bar^2
    holds with probability total_confidence = 1 - (2m+1) delta; the
    feasibility side is zeta_i per constraint, verbatim.
    """

    delta: float
    zetas: np.ndarray  # (m+1,), index 0 = objective
    zeta_bar: float
    delta_lambda: float
    delta_alpha: float
    optimality_bound: float
    feasibility_bounds: np.ndarray  # (m,)
    total_confidence: float

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "zetas": [float(z) for z in self.zetas],
            "zeta_bar": self.zeta_bar,
            "delta_lambda": self.delta_lambda,
            "delta_alpha": self.delta_alpha,
            "optimality_bound": self.optimality_bound,
            "feasibility_bounds": [float(z) for z in self.feasibility_bounds],
            "total_confidence": self.total_confidence,
        }


def pacc_bounds(lambda_star, alpha_star, lambda_hat, alpha_hat, zetas, delta: float) -> PaccBound:
    """Assemble the bound from the population and empirical dual solutions.

    delta_lambda is the larger multiplier l1-norm, delta_alpha the larger
    penalty level; zetas holds one radius per risk (objective first).
    """
    lam_s = np.atleast_1d(np.asarray(lambda_star, dtype=float))
    lam_h = np.atleast_1d(np.asarray(lambda_hat, dtype=float))
    zetas = np.atleast_1d(np.asarray(zetas, dtype=float))
    if lam_s.shape != lam_h.shape:
        raise ValueError("population and empirical multipliers disagree in shape")
    m = lam_s.shape[0]
    if zetas.shape[0] != m + 1:
        raise ValueError(f"need {m + 1} radii (objective first), got {zetas.shape[0]}")
    if np.any(lam_s < 0) or np.any(lam_h < 0):
        raise ValueError("multipliers must be nonnegative")
    if not (alpha_star > 0 and alpha_hat > 0):
        raise ValueError("penalty levels must be positive")
    if np.any(zetas < 0):
        raise ValueError("radii must be nonnegative")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    zeta_bar = float(zetas.max())
    delta_lambda = float(max(np.abs(lam_s).sum(), np.abs(lam_h).sum()))
    delta_alpha = float(max(alpha_star, alpha_hat))
    optimality = (2.0 + delta_lambda) * zeta_bar + delta_alpha * m * zeta_bar**2
    return PaccBound(
        delta=float(delta),
        zetas=zetas,
        zeta_bar=zeta_bar,
        delta_lambda=delta_lambda,
        delta_alpha=delta_alpha,
        optimality_bound=float(optimality),
        feasibility_bounds=zetas[1:].copy(),
        total_confidence=1.0 - (2 * m + 1) * float(delta),
    )


@dataclass
class LocationFamily:
    """Scalar location problem with sampled objective and constraint risks.

    Objective samples v ~ Uniform(v_lo, v_hi) with loss (theta - v)^2;
    constraint samples u ~ Uniform(u_lo, u_hi) with loss u - theta, so the
    population constraint is mean(u) - theta <= 0.  With the constraint
    binding, the population optimum and its dual pair are analytic:
    theta* = mean(u), P* = (theta* - mean(v))^2 + var(v), lambda* =
    2 (theta* - mean(v)), and the quadratic stability inequality holds for
    any alpha* > 0.
    """

    v_lo: float = -0.5
    v_hi: float = 0.5
    u_lo: float = 0.4
    u_hi: float = 1.6
    dom_lo: float = -2.0
    dom_hi: float = 2.0
    constrained: bool = True
    alpha_star: float = 1.0

    def __post_init__(self):
        if self.constraint_mean() <= self.objective_mean():
            raise ValueError("constraint must bind: need mean(u) > mean(v)")

    def objective_mean(self) -> float:
        return 0.5 * (self.v_lo + self.v_hi)

    def objective_var(self) -> float:
        return (self.v_hi - self.v_lo) ** 2 / 12.0

    def constraint_mean(self) -> float:
        return 0.5 * (self.u_lo + self.u_hi)

    @property
    def m(self) -> int:
        return 1 if self.constrained else 0

    def population_optimum(self) -> tuple[float, float]:
        """(P*, theta*) of the population problem."""
        if self.constrained:
            t = self.constraint_mean()
        else:
            t = self.objective_mean()
        return (t - self.objective_mean()) ** 2 + self.objective_var(), t

    def population_dual(self) -> tuple[np.ndarray, float]:
        if not self.constrained:
            return np.zeros(0), self.alpha_star
        _, t = self.population_optimum()
        return np.array([2.0 * (t - self.objective_mean())]), self.alpha_star

    def loss_ranges(self) -> list:
        lo, hi = self.dom_lo, self.dom_hi
        worst = max(abs(lo - self.v_lo), abs(lo - self.v_hi),
                    abs(hi - self.v_lo), abs(hi - self.v_hi))
        ranges = [(0.0, worst**2)]
        if self.constrained:
            ranges.append((self.u_lo - hi, self.u_hi - lo))
        return ranges

    def domain(self) -> ParamDomain:
        return ParamDomain(1, lower=[self.dom_lo], upper=[self.dom_hi])

    def sample_problem(self, n: int, rng) -> ConstrainedProblem:
        """Empirical problem from n fresh draws of each risk's dataset."""
        v = rng.uniform(self.v_lo, self.v_hi, size=n)
        ranges = self.loss_ranges()
        objective = EmpiricalRisk(
            lambda t, v=v: (t[0] - v) ** 2,
            n,
            mean_gradient=lambda t, v=v: np.array([2.0 * np.mean(t[0] - v)]),
            bound=ranges[0],
        )
        constraints = []
        if self.constrained:
            u = rng.uniform(self.u_lo, self.u_hi, size=n)
            constraints.append(
                EmpiricalRisk(
                    lambda t, u=u: u - t[0],
                    n,
                    mean_gradient=lambda t: np.array([-1.0]),
                    bound=ranges[1],
                )
            )
        return ConstrainedProblem(objective, constraints, self.domain())

    def mc_evaluator(self, rng, n_mc: int):
        """Held-out Monte-Carlo estimator of the population risks.

        Returns ``evaluate(theta) -> (risks, worst standard error)`` over one
        fixed draw of n_mc samples per risk.
        """
        v = rng.uniform(self.v_lo, self.v_hi, size=n_mc)
        u = rng.uniform(self.u_lo, self.u_hi, size=n_mc) if self.constrained else None

        def evaluate(theta):
            t = float(np.atleast_1d(theta)[0])
            obj_samples = (t - v) ** 2
            out = [obj_samples.mean()]
            se = [obj_samples.std() / math.sqrt(n_mc)]
            if u is not None:
                con_samples = u - t
                out.append(con_samples.mean())
                se.append(con_samples.std() / math.sqrt(n_mc))
            return np.array(out), float(max(se))

        return evaluate


def _default_harness_ascent() -> AscentConfig:
    # the penalty level must end high enough that the solver's residual
    # infeasibility sits well below the sampling noise at the largest N
    return AscentConfig(
        alpha0=2.0,
        growth_factor=2.0,
        growth_interval=5,
        outer_iters=60,
        eps0=1e-3,
        inner=InnerSolverConfig(step_size=0.2, max_steps=300, grad_tol=1e-10),
    )


@dataclass
class HarnessReport:
    """Per-sample-size medians and bound-coverage fractions over trials."""

    note: str
    delta: float
    sample_sizes: list
    trials: int
    population_optimum: float
    mc_standard_error: float
    median_objective_gap: list  # median |P* - population objective at theta_hat|
    median_constraint_gap: list  # median max_i |population constraint_i|
    feasibility_coverage: list  # fraction of trials with population slacks <= zeta_i
    optimality_coverage: list  # fraction of trials with |P* - obj| <= optimality bound
    optimality_bounds: list  # median assembled optimality bound per N
    solver_failures: list

    def to_dict(self) -> dict:
        return {
            "note": self.note,
            "delta": self.delta,
            "sample_sizes": self.sample_sizes,
            "trials": self.trials,
            "population_optimum": self.population_optimum,
            "mc_standard_error": self.mc_standard_error,
            "median_objective_gap": self.median_objective_gap,
            "median_constraint_gap": self.median_constraint_gap,
            "feasibility_coverage": self.feasibility_coverage,
            "optimality_coverage": self.optimality_coverage,
            "optimality_bounds": self.optimality_bounds,
            "solver_failures": self.solver_failures,
        }


def empirical_pacc_harness(
    family: LocationFamily,
    sample_sizes,
    trials: int,
    delta: float,
    seed,
    ascent: Optional[AscentConfig] = None,
) -> HarnessReport:
    """Solve the sampled problem repeatedly and measure the bound directions.

    For each sample size and trial: draw datasets, solve the empirical
    augmented dual, and measure the population objective gap and constraint
    values on a shared Monte-Carlo held-out set of 10x the largest sample
    size.  Solver failures are counted, not fatal.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sample_sizes = [int(n) for n in sample_sizes]
    if any(n < 1 for n in sample_sizes):
        raise ValueError("sample sizes must be positive")
    ascent = ascent or _default_harness_ascent()
    p_star, _ = family.population_optimum()
    lam_star, alpha_star = family.population_dual()
    ranges = family.loss_ranges()
    n_mc = 10 * max(sample_sizes)
    population = family.mc_evaluator(np.random.default_rng([seed, 7001]), n_mc)

    med_obj, med_con, feas_cov, opt_cov, med_bound, failures = [], [], [], [], [], []
    mc_se_worst = 0.0
    for n in sample_sizes:
        zetas = np.array([hoeffding_radius(r, n, delta) for r in ranges])
        obj_gaps, con_gaps, feas_hits, opt_hits, bounds = [], [], [], [], []
        failed = 0
        for t in range(trials):
            rng = np.random.default_rng([seed, n, t])
            problem = family.sample_problem(n, rng)
            try:
                result = solve_augmented(problem, ascent)
            except DivergenceError:
                failed += 1
                continue
            pop, se = population(result.theta)
            mc_se_worst = max(mc_se_worst, se)
            bound = pacc_bounds(
                lam_star, alpha_star, result.dual.lam, result.dual.alpha, zetas, delta
            )
            obj_gaps.append(abs(p_star - pop[0]))
            if family.constrained:
                con_gaps.append(float(np.max(np.abs(pop[1:]))))
                feas_hits.append(bool(np.all(pop[1:] <= bound.feasibility_bounds)))
            else:
                con_gaps.append(0.0)
                feas_hits.append(True)
            opt_hits.append(abs(p_star - pop[0]) <= bound.optimality_bound)
            bounds.append(bound.optimality_bound)
        med_obj.append(float(np.median(obj_gaps)) if obj_gaps else float("nan"))
        med_con.append(float(np.median(con_gaps)) if con_gaps else float("nan"))
        feas_cov.append(float(np.mean(feas_hits)) if feas_hits else float("nan"))
        opt_cov.append(float(np.mean(opt_hits)) if opt_hits else float("nan"))
        med_bound.append(float(np.median(bounds)) if bounds else float("nan"))
        failures.append(failed)
    return HarnessReport(
        note=PLUGIN_NOTE,
        delta=float(delta),
        sample_sizes=sample_sizes,
        trials=trials,
        population_optimum=p_star,
        mc_standard_error=mc_se_worst,
        median_objective_gap=med_obj,
        median_constraint_gap=med_con,
        feasibility_coverage=feas_cov,
        optimality_coverage=opt_cov,
        optimality_bounds=med_bound,
        solver_failures=failures,
    )
