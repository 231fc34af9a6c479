"""Shifted quadratic penalty kernel and the augmented / standard Lagrangians.

The penalty kernel is psi(x, y) = [max(0, 2x + y)^2 - y^2] / 4.  The augmented
Lagrangian of a problem with constraint values l_i, multipliers lam_i and
penalty level alpha > 0 is

    objective + alpha * sum_i psi(l_i, lam_i / alpha)

which is algebraically the classic shifted quadratic penalty
[max(0, lam_i + 2 alpha l_i)^2 - lam_i^2] / (4 alpha) with penalty constant
2 alpha; that second form is what we evaluate, since it avoids the lam^2 /
alpha^2 cancellation for large alpha.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import ConstrainedProblem, as_theta, evaluate_risks, risk_gradient


def penalty_kernel(x, y):
    """psi(x, y) = [max(0, 2x + y)^2 - y^2] / 4, elementwise."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    active = np.maximum(0.0, 2.0 * x + y)
    out = (active * active - y * y) / 4.0
    return out if out.ndim else float(out)


def scaled_penalty(x, lam, alpha):
    """alpha * psi(x, lam/alpha) in the cancellation-free form, elementwise.

    Equals [max(0, lam + 2 alpha x)^2 - lam^2] / (4 alpha); requires alpha > 0.
    """
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise ValueError("penalty level must be positive")
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    shifted = np.maximum(0.0, lam + 2.0 * alpha * x)
    out = (shifted * shifted - lam * lam) / (4.0 * alpha)
    return out if out.ndim else float(out)


def penalty_weight(x, lam, alpha):
    """d/dx of scaled_penalty: max(0, lam + 2 alpha x), elementwise.

    The kernel is C^1; at the kink lam + 2 alpha x = 0 both one-sided
    derivatives are 0, so no tie-break is needed (the second derivative jumps
    there).
    """
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    out = np.maximum(0.0, lam + 2.0 * alpha * x)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DualState:
    """Multiplier vector and penalty level; alpha must be strictly positive."""

    lam: np.ndarray
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "lam", np.atleast_1d(np.asarray(self.lam, dtype=float)))
        object.__setattr__(self, "alpha", float(self.alpha))
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not np.all(np.isfinite(self.lam)):
            raise ValueError("multipliers must be finite")

    @property
    def m(self) -> int:
        return self.lam.shape[0]


def _check_dual(problem: ConstrainedProblem, dual: DualState):
    if dual.m != problem.m:
        raise ValueError(f"{dual.m} multipliers for {problem.m} constraints")


def augmented_lagrangian(problem: ConstrainedProblem, theta, dual: DualState) -> float:
    """objective + sum_i scaled_penalty(constraint_i, lam_i, alpha) at theta."""
    _check_dual(problem, dual)
    risks = evaluate_risks(problem, theta)
    if problem.m == 0:
        return float(risks[0])
    return float(risks[0] + np.sum(scaled_penalty(risks[1:], dual.lam, dual.alpha)))


def augmented_lagrangian_grad(problem: ConstrainedProblem, theta, dual: DualState) -> np.ndarray:
    """Gradient in theta: grad_obj + sum_i max(0, lam_i + 2 alpha l_i) grad_l_i."""
    _check_dual(problem, dual)
    theta = as_theta(theta, problem.dimension)
    risks = evaluate_risks(problem, theta)
    grad = risk_gradient(problem, theta, 0)
    for i in range(problem.m):
        w = penalty_weight(risks[1 + i], dual.lam[i], dual.alpha)
        if w != 0.0:
            grad = grad + w * risk_gradient(problem, theta, 1 + i)
    return grad


def augmented_lagrangian_value_and_grad(
    problem: ConstrainedProblem, theta, dual: DualState
) -> tuple[float, np.ndarray, np.ndarray]:
    """Single-pass (value, grad, constraint_values); one evaluation per risk."""
    _check_dual(problem, dual)
    theta = as_theta(theta, problem.dimension)
    obj, grad = problem.objective.value_and_grad(theta)
    slacks = np.empty(problem.m)
    total = obj
    grad = np.array(grad, dtype=float)
    for i, risk in enumerate(problem.constraints):
        li, gi = risk.value_and_grad(theta)
        slacks[i] = li
        total += scaled_penalty(li, dual.lam[i], dual.alpha)
        w = penalty_weight(li, dual.lam[i], dual.alpha)
        if w != 0.0:
            grad += w * gi
    return float(total), grad, slacks


def standard_lagrangian(problem: ConstrainedProblem, theta, lam) -> float:
    """objective + sum_i lam_i * constraint_i with lam >= 0 elementwise."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.shape[0] != problem.m:
        raise ValueError(f"{lam.shape[0]} multipliers for {problem.m} constraints")
    if np.any(lam < 0):
        raise ValueError("standard Lagrangian requires nonnegative multipliers")
    risks = evaluate_risks(problem, theta)
    return float(risks[0] + np.dot(lam, risks[1:]))


def standard_lagrangian_value_and_grad(
    problem: ConstrainedProblem, theta, lam
) -> tuple[float, np.ndarray, np.ndarray]:
    """Single-pass (value, grad, constraint_values) for the standard Lagrangian."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(lam < 0):
        raise ValueError("standard Lagrangian requires nonnegative multipliers")
    theta = as_theta(theta, problem.dimension)
    obj, grad = problem.objective.value_and_grad(theta)
    grad = np.array(grad, dtype=float)
    slacks = np.empty(problem.m)
    total = obj
    for i, risk in enumerate(problem.constraints):
        li, gi = risk.value_and_grad(theta)
        slacks[i] = li
        total += lam[i] * li
        if lam[i] != 0.0:
            grad += lam[i] * gi
    return float(total), grad, slacks
