"""Constrained risk-minimization problems over finite-dimensional parameter domains.

A problem bundles an objective risk, a list of inequality-constrained risks
(feasible means each constraint value is <= 0), and a closed parameter domain.
Risks come in two kinds: analytic scalar fields with closed-form gradients
(used by the brute-force oracles), and empirical sample means over finite
datasets (used for training).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class GradientUnavailableError(RuntimeError):
    """The indexed risk functional has no gradient channel."""


def compensated_mean(values: np.ndarray) -> float:
    """Exact-accumulation mean; reproducible bit-for-bit across runs."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("cannot average an empty sample set")
    return math.fsum(values.tolist()) / values.size


def as_theta(theta, dimension: int | None = None) -> np.ndarray:
    """Coerce to a 1-D float parameter vector, optionally checking dimension."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.ndim != 1:
        raise ValueError(f"parameter vector must be 1-D, got shape {theta.shape}")
    if dimension is not None and theta.shape[0] != dimension:
        raise ValueError(
            f"parameter dimension mismatch: expected {dimension}, got {theta.shape[0]}"
        )
    return theta


@dataclass
class ParamDomain:
    """Closed parameter domain: all of R^p, or a per-coordinate box.

    ``lower``/``upper`` are either both None (unbounded domain) or arrays of
    length ``dimension`` with lower <= upper; +-inf entries are allowed to
    leave single coordinates unbounded.
    """

    dimension: int
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("domain dimension must be >= 1")
        if (self.lower is None) != (self.upper is None):
            raise ValueError("bounds must be given for both sides or neither")
        if self.lower is not None:
            self.lower = np.broadcast_to(
                np.asarray(self.lower, dtype=float), (self.dimension,)
            ).copy()
            self.upper = np.broadcast_to(
                np.asarray(self.upper, dtype=float), (self.dimension,)
            ).copy()
            if np.any(self.lower > self.upper):
                raise ValueError("lower bound exceeds upper bound")

    @property
    def bounded(self) -> bool:
        return (
            self.lower is not None
            and bool(np.all(np.isfinite(self.lower)))
            and bool(np.all(np.isfinite(self.upper)))
        )

    def clip(self, theta: np.ndarray) -> np.ndarray:
        theta = as_theta(theta, self.dimension)
        if self.lower is None:
            return theta
        return np.clip(theta, self.lower, self.upper)

    def contains(self, theta, tol: float = 0.0) -> bool:
        theta = as_theta(theta, self.dimension)
        if self.lower is None:
            return True
        return bool(
            np.all(theta >= self.lower - tol) and np.all(theta <= self.upper + tol)
        )

    def center(self) -> np.ndarray:
        """A deterministic interior start point (origin when unbounded)."""
        if self.bounded:
            return 0.5 * (self.lower + self.upper)
        return np.zeros(self.dimension)


class RiskFunctional:
    """Scalar risk over parameters with an optional gradient channel.

    ``bound``, when present, declares the range [lo, hi] of the sample-wise
    loss; it feeds the sample-complexity radii.
    """

    kind = "abstract"

    def __init__(self, bound: Optional[tuple] = None):
        if bound is not None:
            lo, hi = float(bound[0]), float(bound[1])
            if not hi > lo:
                raise ValueError(f"declared loss range must satisfy hi > lo, got {bound}")
            bound = (lo, hi)
        self.bound = bound

    @property
    def has_gradient(self) -> bool:
        return False

    def value(self, theta) -> float:
        raise NotImplementedError

    def gradient(self, theta) -> np.ndarray:
        raise GradientUnavailableError(f"{self.kind} risk has no gradient channel")

    def value_and_grad(self, theta) -> tuple[float, np.ndarray]:
        return self.value(theta), self.gradient(theta)


class AnalyticRisk(RiskFunctional):
    """Closed-form scalar field with an optional closed-form gradient."""

    kind = "analytic"

    def __init__(self, fn: Callable, grad: Optional[Callable] = None, bound=None):
        super().__init__(bound)
        self._fn = fn
        self._grad = grad

    @property
    def has_gradient(self) -> bool:
        return self._grad is not None

    def value(self, theta) -> float:
        return float(self._fn(np.asarray(theta, dtype=float)))

    def gradient(self, theta) -> np.ndarray:
        if self._grad is None:
            raise GradientUnavailableError("analytic risk constructed without gradient")
        return np.atleast_1d(np.asarray(self._grad(np.asarray(theta, dtype=float)), dtype=float))


class EmpiricalRisk(RiskFunctional):
    """Sample mean of a per-sample loss over a fixed finite dataset.

    ``sample_values(theta)`` returns the per-sample loss vector (length
    ``n_samples``); ``mean_gradient(theta)``, when given, must equal the mean
    of per-sample gradients.  ``fused`` optionally returns
    ``(sample_values, mean_gradient)`` in one pass to avoid duplicated
    forward work.  ``offset`` is a constant added after the mean (used to
    fold a constraint threshold into the risk without rounding through the
    accumulation); a declared ``bound`` refers to the shifted loss.
    """

    kind = "empirical"

    def __init__(
        self,
        sample_values: Callable,
        n_samples: int,
        mean_gradient: Optional[Callable] = None,
        fused: Optional[Callable] = None,
        bound=None,
        offset: float = 0.0,
    ):
        super().__init__(bound)
        if n_samples < 1:
            raise ValueError("empirical risk requires a non-empty dataset")
        self.n_samples = int(n_samples)
        self.offset = float(offset)
        self._sample_values = sample_values
        self._mean_gradient = mean_gradient
        self._fused = fused

    @property
    def has_gradient(self) -> bool:
        return self._mean_gradient is not None or self._fused is not None

    def sample_values(self, theta) -> np.ndarray:
        vals = np.asarray(self._sample_values(np.asarray(theta, dtype=float)), dtype=float)
        if vals.shape != (self.n_samples,):
            raise ValueError(
                f"per-sample loss returned shape {vals.shape}, expected ({self.n_samples},)"
            )
        return vals

    def value(self, theta) -> float:
        return compensated_mean(self.sample_values(theta)) + self.offset

    def gradient(self, theta) -> np.ndarray:
        if self._mean_gradient is not None:
            return np.atleast_1d(
                np.asarray(self._mean_gradient(np.asarray(theta, dtype=float)), dtype=float)
            )
        if self._fused is not None:
            return self.value_and_grad(theta)[1]
        raise GradientUnavailableError("empirical risk constructed without gradient")

    def value_and_grad(self, theta) -> tuple[float, np.ndarray]:
        if self._fused is not None:
            vals, grad = self._fused(np.asarray(theta, dtype=float))
            vals = np.asarray(vals, dtype=float)
            return compensated_mean(vals) + self.offset, np.atleast_1d(
                np.asarray(grad, dtype=float)
            )
        return self.value(theta), self.gradient(theta)


@dataclass
class ConstrainedProblem:
    """Objective risk plus m constraint risks over a parameter domain.

    Feasibility means every constraint risk evaluates <= 0.
    """

    objective: RiskFunctional
    constraints: list = field(default_factory=list)
    domain: ParamDomain = None

    def __post_init__(self):
        if self.domain is None:
            raise ValueError("a parameter domain is required")
        # Boundedness below is checked only when a loss range is declared.
        if self.objective.bound is not None and not math.isfinite(self.objective.bound[0]):
            raise ValueError("objective declares a loss range with no finite lower bound")

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def all_risks(self) -> list:
        return [self.objective, *self.constraints]


def evaluate_risks(problem: ConstrainedProblem, theta) -> np.ndarray:
    """Evaluate [objective, constraint_1, ..., constraint_m] at theta.

    Empirical risks return the sample mean of the per-sample loss.  Raises on
    dimension mismatch or a non-finite risk value (numerically invalid model
    output).
    """
    theta = as_theta(theta, problem.dimension)
    out = np.empty(problem.m + 1)
    for i, risk in enumerate(problem.all_risks()):
        v = risk.value(theta)
        if not math.isfinite(v):
            raise ValueError(f"risk {i} evaluated to non-finite value {v!r}")
        out[i] = v
    return out


def risk_gradient(problem: ConstrainedProblem, theta, index: int) -> np.ndarray:
    """Gradient of the indexed risk (0 = objective, 1..m = constraints)."""
    theta = as_theta(theta, problem.dimension)
    if not 0 <= index <= problem.m:
        raise IndexError(f"risk index {index} out of range 0..{problem.m}")
    return problem.all_risks()[index].gradient(theta)


# ---------------------------------------------------------------------------
# Built-in low-dimensional test problems (used by the oracles and the CLI).


def toy_qp() -> ConstrainedProblem:
    """min t^2 subject to 1 - t <= 0 on [-3, 3].

    Optimum 1 at t = 1 with multiplier 2; the perturbed optimum is
    (1 - u)^2 for u <= 1 and 0 beyond.
    """
    objective = AnalyticRisk(
        lambda t: t[0] ** 2, lambda t: np.array([2.0 * t[0]]), bound=(0.0, 9.0)
    )
    constraint = AnalyticRisk(lambda t: 1.0 - t[0], lambda t: np.array([-1.0]))
    return ConstrainedProblem(
        objective, [constraint], ParamDomain(1, lower=[-3.0], upper=[3.0])
    )


def nonconvex_1d() -> ConstrainedProblem:
    """min sin(3t) + t^2/4 subject to cos(t) - 1/2 <= 0 on [-3, 3].

    The unconstrained minimizer (t ~ -0.496) is infeasible, so the standard
    Lagrangian dual has a strictly positive gap while the augmented dual
    closes it.
    """
    objective = AnalyticRisk(
        lambda t: math.sin(3.0 * t[0]) + t[0] ** 2 / 4.0,
        lambda t: np.array([3.0 * math.cos(3.0 * t[0]) + t[0] / 2.0]),
        bound=(-1.0, 4.0),
    )
    constraint = AnalyticRisk(
        lambda t: math.cos(t[0]) - 0.5,
        lambda t: np.array([-math.sin(t[0])]),
    )
    return ConstrainedProblem(
        objective, [constraint], ParamDomain(1, lower=[-3.0], upper=[3.0])
    )


BUILTIN_PROBLEMS = {"toy-qp": toy_qp, "nonconvex-1d": nonconvex_1d}
