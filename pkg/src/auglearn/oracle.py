"""Brute-force ground truth on dense grids for low-dimensional problems.

Everything here realizes infima/suprema as minima/maxima over explicit finite
grids, guarded to parameter dimension <= 3.  Every result carries an explicit
resolution bound (half the largest adjacent function-value jump along the
grid) so the duality assertions can be stated as inequalities plus that bound
without assuming smoothness constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import null_space, qr
from scipy.stats import norm, qmc

from .auglag import scaled_penalty, standard_lagrangian_value_and_grad
from .problems import ConstrainedProblem, as_theta, evaluate_risks, risk_gradient

MAX_ORACLE_DIM = 3

INFEASIBLE = float("inf")  # sentinel for perturbations with no feasible grid point


class InfeasibleGridError(RuntimeError):
    """No grid point satisfies all constraints."""


@dataclass
class GridSpec:
    """Axes for the brute-force searches.

    Each axis is (lo, hi, n) with n >= 2.  ``alpha_axis`` is sampled
    log-uniformly since the augmented dual may close the gap only at large
    penalty levels.  ``u_axes`` cover the constraint-relaxation neighborhood
    used by the perturbation function.
    """

    theta_axes: list
    lambda_axes: list = field(default_factory=list)
    alpha_axis: tuple = (1e-2, 1e4, 25)
    u_axes: list = field(default_factory=list)

    def __post_init__(self):
        for name in ("theta_axes", "lambda_axes", "u_axes"):
            for lo, hi, n in getattr(self, name):
                if n < 2:
                    raise ValueError(f"{name} needs >= 2 points per axis")
                if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                    raise ValueError(f"{name} axis ({lo}, {hi}) must be a finite interval")
        lo, hi, n = self.alpha_axis
        if not (0 < lo < hi) or n < 2:
            raise ValueError("alpha axis must satisfy 0 < lo < hi with >= 2 points")

    @staticmethod
    def _axis_points(axes) -> list[np.ndarray]:
        return [np.linspace(lo, hi, n) for lo, hi, n in axes]

    def theta_shape(self) -> tuple:
        return tuple(n for _, _, n in self.theta_axes)

    def theta_points(self) -> np.ndarray:
        """All theta grid nodes, shape (prod(n_i), p), C-ordered."""
        axes = self._axis_points(self.theta_axes)
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def lambda_points(self) -> np.ndarray:
        axes = self._axis_points(self.lambda_axes)
        if not axes:
            return np.zeros((1, 0))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def alphas(self) -> np.ndarray:
        lo, hi, n = self.alpha_axis
        return np.logspace(math.log10(lo), math.log10(hi), n)

    def u_points(self) -> np.ndarray:
        axes = self._axis_points(self.u_axes)
        if not axes:
            return np.zeros((1, 0))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @staticmethod
    def default_for(problem: ConstrainedProblem, theta_points: int = 6001,
                    lambda_max: float = 6.0, lambda_points: int = 61,
                    alpha_axis: tuple = (1e-2, 1e4, 25),
                    u_half_width: float = 0.5, u_points: int = 101) -> "GridSpec":
        dom = problem.domain
        if not dom.bounded:
            raise ValueError("default grids require a bounded domain")
        per_axis = max(2, int(round(theta_points ** (1.0 / dom.dimension))))
        n = theta_points if dom.dimension == 1 else per_axis
        return GridSpec(
            theta_axes=[(float(lo), float(hi), n) for lo, hi in zip(dom.lower, dom.upper)],
            lambda_axes=[(0.0, lambda_max, lambda_points)] * problem.m,
            alpha_axis=alpha_axis,
            u_axes=[(-u_half_width, u_half_width, u_points)] * problem.m,
        )


def _guard_dimension(problem: ConstrainedProblem):
    if problem.dimension > MAX_ORACLE_DIM:
        raise ValueError(
            f"brute-force oracle supports dimension <= {MAX_ORACLE_DIM}, "
            f"got {problem.dimension}"
        )


@dataclass
class RiskTable:
    """All risks tabulated over the theta grid, with per-risk resolution bounds."""

    theta: np.ndarray  # (N, p)
    values: np.ndarray  # (m+1, N)
    shape: tuple
    resolution_bounds: np.ndarray  # (m+1,)

    @property
    def objective(self) -> np.ndarray:
        return self.values[0]

    @property
    def constraints(self) -> np.ndarray:
        return self.values[1:]

    @property
    def resolution_bound(self) -> float:
        return float(np.max(self.resolution_bounds))


def _resolution_bound(values: np.ndarray, shape: tuple) -> float:
    """Half the max absolute jump between axis-adjacent grid nodes."""
    grid = values.reshape(shape)
    worst = 0.0
    for axis in range(len(shape)):
        if shape[axis] >= 2:
            jumps = np.abs(np.diff(grid, axis=axis))
            worst = max(worst, float(jumps.max()))
    return 0.5 * worst


def tabulate_risks(problem: ConstrainedProblem, grid: GridSpec) -> RiskTable:
    _guard_dimension(problem)
    points = grid.theta_points()
    values = np.empty((problem.m + 1, points.shape[0]))
    for j, theta in enumerate(points):
        values[:, j] = evaluate_risks(problem, theta)
    shape = grid.theta_shape()
    bounds = np.array([_resolution_bound(values[i], shape) for i in range(problem.m + 1)])
    return RiskTable(points, values, shape, bounds)


def brute_force_minimum(
    problem: ConstrainedProblem, grid: GridSpec, table: Optional[RiskTable] = None
) -> tuple[float, np.ndarray]:
    """Minimum of the objective over feasible grid points, with its argmin."""
    table = table or tabulate_risks(problem, grid)
    feasible = np.all(table.constraints <= 0.0, axis=0)
    if not feasible.any():
        raise InfeasibleGridError("no feasible point on the theta grid")
    vals = np.where(feasible, table.objective, np.inf)
    j = int(np.argmin(vals))
    return float(vals[j]), table.theta[j].copy()


def perturbation_function(
    problem: ConstrainedProblem, u, grid: GridSpec, table: Optional[RiskTable] = None
) -> float:
    """Grid minimum of the objective subject to constraint_i <= u_i.

    Returns the INFEASIBLE sentinel (+inf) when no grid point qualifies.
    """
    table = table or tabulate_risks(problem, grid)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape[0] != problem.m:
        raise ValueError(f"perturbation has {u.shape[0]} entries for {problem.m} constraints")
    feasible = np.all(table.constraints <= u[:, None], axis=0)
    if not feasible.any():
        return INFEASIBLE
    return float(table.objective[feasible].min())


@dataclass
class PerturbationTable:
    """p(u) tabulated over the relaxation grid (INFEASIBLE where empty)."""

    u: np.ndarray  # (U, m)
    values: np.ndarray  # (U,)

    def value_at_zero(self) -> float:
        at0 = np.all(self.u == 0.0, axis=1)
        if not at0.any():
            raise ValueError("relaxation grid does not contain u = 0")
        return float(self.values[np.argmax(at0)])


def perturbation_table(
    problem: ConstrainedProblem, grid: GridSpec, table: Optional[RiskTable] = None
) -> PerturbationTable:
    table = table or tabulate_risks(problem, grid)
    u_points = grid.u_points()
    values = np.array(
        [perturbation_function(problem, u, grid, table) for u in u_points]
    )
    return PerturbationTable(u_points, values)


def dual_value(table: RiskTable, lam, alpha: float) -> float:
    """g(lam, alpha): grid minimum of the augmented Lagrangian at a dual point."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    total = table.objective.copy()
    for i in range(table.constraints.shape[0]):
        total += scaled_penalty(table.constraints[i], lam[i], alpha)
    return float(total.min())


def standard_dual_value(table: RiskTable, lam) -> float:
    """g_std(lam): grid minimum of the standard Lagrangian."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    total = table.objective.copy()
    for i in range(table.constraints.shape[0]):
        total += lam[i] * table.constraints[i]
    return float(total.min())


def dual_value_via_perturbation(
    problem: ConstrainedProblem, lam, alpha: float, grid: GridSpec,
    table: Optional[RiskTable] = None,
) -> float:
    """g(lam, alpha) computed from the perturbation side (1 constraint only).

    Minimizes p(u) + lam*u + alpha*u^2 over the image grid of constraint
    values augmented with the interior stationary point -lam/(2 alpha); on
    that grid the two dual definitions agree exactly.  p over the sorted
    image is a single cumulative-min pass.
    """
    if problem.m != 1:
        raise ValueError("perturbation-side dual evaluation implemented for m = 1")
    table = table or tabulate_risks(problem, grid)
    lam = float(np.atleast_1d(np.asarray(lam, dtype=float))[0])
    order = np.argsort(table.constraints[0], kind="stable")
    u_sorted = table.constraints[0][order]
    p_sorted = np.minimum.accumulate(table.objective[order])
    best = float(np.min(p_sorted + lam * u_sorted + alpha * u_sorted * u_sorted))
    u0 = -lam / (2.0 * alpha)
    j = int(np.searchsorted(u_sorted, u0, side="right")) - 1
    if j >= 0:  # p(u0) = p at the largest image value <= u0
        best = min(best, float(p_sorted[j] + lam * u0 + alpha * u0 * u0))
    return best


@dataclass
class DualSurface:
    """g over the (lambda, alpha) grid plus the standard-dual column."""

    lambda_grid: np.ndarray  # (L, m)
    alphas: np.ndarray  # (A,)
    g_augmented: np.ndarray  # (L, A)
    g_standard: np.ndarray  # (L,)


def dual_surface(
    problem: ConstrainedProblem, grid: GridSpec, table: Optional[RiskTable] = None
) -> DualSurface:
    table = table or tabulate_risks(problem, grid)
    lam_grid = grid.lambda_points()
    alphas = grid.alphas()
    g_aug = np.empty((lam_grid.shape[0], alphas.shape[0]))
    g_std = np.empty(lam_grid.shape[0])
    for li, lam in enumerate(lam_grid):
        g_std[li] = standard_dual_value(table, lam)
        for ai, alpha in enumerate(alphas):
            g_aug[li, ai] = dual_value(table, lam, alpha)
    return DualSurface(lam_grid, alphas, g_aug, g_std)


@dataclass
class DualityReport:
    """Primal optimum, dual suprema, gaps, and the attaining dual pair."""

    problem_id: str
    inf_P: float
    argmin_theta: list
    sup_D_augmented: float
    sup_D_standard: float
    gap_augmented: float
    gap_standard: float
    lambda_bar: list
    alpha_bar: float
    grid_resolution_bound: float
    theta_grid_points: int
    weak_duality_ok: bool
    dominance_ok: bool

    def to_dict(self) -> dict:
        return {
            "problem_id": self.problem_id,
            "inf_P": self.inf_P,
            "argmin_theta": self.argmin_theta,
            "sup_D_augmented": self.sup_D_augmented,
            "sup_D_standard": self.sup_D_standard,
            "gap_augmented": self.gap_augmented,
            "gap_standard": self.gap_standard,
            "lambda_bar": self.lambda_bar,
            "alpha_bar": self.alpha_bar,
            "grid_resolution_bound": self.grid_resolution_bound,
            "theta_grid_points": self.theta_grid_points,
            "weak_duality_ok": self.weak_duality_ok,
            "dominance_ok": self.dominance_ok,
        }

    @staticmethod
    def from_dict(d: dict) -> "DualityReport":
        return DualityReport(**d)


_FLOAT_SLACK = 1e-9  # float-noise allowance on exact on-grid inequalities


def duality_report(
    problem: ConstrainedProblem, grid: GridSpec, problem_id: str = "",
    table: Optional[RiskTable] = None, surface: Optional[DualSurface] = None,
) -> DualityReport:
    """Assemble the full duality check for one problem on one grid.

    The attaining dual pair is the grid node maximizing g, with ties broken
    toward the smallest alpha and then the smallest multiplier sum (the
    smallest pair attaining the supremum).
    """
    table = table or tabulate_risks(problem, grid)
    surface = surface or dual_surface(problem, grid, table)
    inf_p, arg = brute_force_minimum(problem, grid, table)
    sup_aug = float(surface.g_augmented.max())
    sup_std = float(surface.g_standard.max())
    near = np.argwhere(surface.g_augmented >= sup_aug - 1e-12)
    order = sorted(
        (float(surface.alphas[ai]), float(surface.lambda_grid[li].sum()), li, ai)
        for li, ai in near
    )
    _, _, li, ai = order[0]
    lam_bar = surface.lambda_grid[li]
    alpha_bar = float(surface.alphas[ai])
    bound = table.resolution_bound
    weak_ok = bool(np.all(surface.g_augmented <= inf_p + bound + _FLOAT_SLACK))
    dom_ok = bool(
        np.all(surface.g_standard[:, None] <= surface.g_augmented + _FLOAT_SLACK)
    )
    return DualityReport(
        problem_id=problem_id,
        inf_P=inf_p,
        argmin_theta=[float(v) for v in arg],
        sup_D_augmented=sup_aug,
        sup_D_standard=sup_std,
        gap_augmented=inf_p - sup_aug,
        gap_standard=inf_p - sup_std,
        lambda_bar=[float(v) for v in lam_bar],
        alpha_bar=alpha_bar,
        grid_resolution_bound=bound,
        theta_grid_points=table.theta.shape[0],
        weak_duality_ok=weak_ok,
        dominance_ok=dom_ok,
    )


@dataclass
class StabilityCheck:
    passed: bool
    max_violation: float
    n_violations: int


def second_order_stability_check(
    ptable: PerturbationTable, lambda_bar, alpha_bar: float, tol: float = 1e-12
) -> StabilityCheck:
    """Check p(u) >= p(0) - <lambda_bar, u> - (alpha_bar/2)*|u|^2 on the grid.

    Relaxations with no feasible point (p = +inf) satisfy the inequality
    trivially and are skipped.  ``max_violation`` is the largest amount by
    which the quadratic lower bound exceeds p(u) (<= 0 means no violation).
    """
    lam = np.atleast_1d(np.asarray(lambda_bar, dtype=float))
    p0 = ptable.value_at_zero()
    finite = np.isfinite(ptable.values)
    u = ptable.u[finite]
    p = ptable.values[finite]
    bound = p0 - u @ lam - 0.5 * alpha_bar * np.sum(u * u, axis=1)
    violation = bound - p
    max_violation = float(violation.max()) if violation.size else 0.0
    n_violations = int(np.sum(violation > tol))
    return StabilityCheck(n_violations == 0, max_violation, n_violations)


@dataclass
class LicqReport:
    passed: bool
    active_indices: list
    rank: int
    threshold: float


def licq_check(
    problem: ConstrainedProblem, theta, active_tol: float = 1e-6
) -> LicqReport:
    """Linear independence of active-constraint gradients at theta.

    Active means |constraint_i| <= active_tol.  Rank comes from a pivoted QR
    of the gradient matrix with a scale-relative threshold on |diag(R)|.
    """
    theta = as_theta(theta, problem.dimension)
    risks = evaluate_risks(problem, theta)
    active = [i for i in range(problem.m) if abs(risks[1 + i]) <= active_tol]
    if not active:
        return LicqReport(True, [], 0, 0.0)
    grads = np.stack([risk_gradient(problem, theta, 1 + i) for i in active])
    _, R, _ = qr(grads.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    scale = diag[0] if diag.size else 0.0
    threshold = max(grads.shape) * np.finfo(float).eps * scale
    rank = int(np.sum(diag > threshold)) if scale > 0 else 0
    return LicqReport(rank == len(active), active, rank, float(threshold))


@dataclass
class SoscReport:
    passed: bool
    min_curvature: Optional[float]
    cone_dimension: int
    n_directions_tested: int
    hessian: np.ndarray
    note: str = ""


def _fd_hessian(problem: ConstrainedProblem, theta, lam, step: float) -> np.ndarray:
    """Central differences of the standard-Lagrangian gradient."""
    p = theta.shape[0]
    H = np.empty((p, p))
    for j in range(p):
        e = np.zeros(p)
        e[j] = step
        _, gp, _ = standard_lagrangian_value_and_grad(problem, theta + e, lam)
        _, gm, _ = standard_lagrangian_value_and_grad(problem, theta - e, lam)
        H[:, j] = (gp - gm) / (2.0 * step)
    if not np.all(np.isfinite(H)):
        raise ValueError("finite-difference Hessian is non-finite")
    return 0.5 * (H + H.T)


def _sphere_directions(dim: int, n: int) -> np.ndarray:
    """Deterministic quasi-random unit directions (includes both signs)."""
    if dim == 0:
        return np.zeros((0, 0))
    half = max(1, n // 2)
    sampler = qmc.Halton(d=dim, scramble=False)
    pts = sampler.random(half + 2)
    gauss = norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
    norms = np.linalg.norm(gauss, axis=1)
    gauss = gauss[norms > 1e-9][:half]
    unit = gauss / np.linalg.norm(gauss, axis=1, keepdims=True)
    return np.vstack([unit, -unit])


def sosc_check(
    problem: ConstrainedProblem,
    theta_bar,
    lambda_bar,
    *,
    active_tol: float = 1e-6,
    curvature_tol: float = 1e-8,
    n_directions: int = 512,
    fd_step: float = 1e-5,
) -> SoscReport:
    """Sampled second-order-sufficiency diagnostic at a KKT pair.

    Builds the Lagrangian Hessian by central differences, reduces directions
    to the null space of gradients of active constraints with positive
    multipliers, filters by the <= 0 half-spaces of active zero-multiplier
    constraints, and requires positive curvature along every sampled unit
    direction in the resulting cone.  A sampled check is a diagnostic, not a
    proof.
    """
    _guard_dimension(problem)
    theta_bar = as_theta(theta_bar, problem.dimension)
    lam = np.atleast_1d(np.asarray(lambda_bar, dtype=float))
    risks = evaluate_risks(problem, theta_bar)
    H = _fd_hessian(problem, theta_bar, lam, fd_step)
    strict, weak = [], []
    for i in range(problem.m):
        if abs(risks[1 + i]) <= active_tol:
            (strict if lam[i] > 1e-12 else weak).append(i)
    if strict:
        A0 = np.stack([risk_gradient(problem, theta_bar, 1 + i) for i in strict])
        Z = null_space(A0)
    else:
        Z = np.eye(problem.dimension)
    d = Z.shape[1]
    if d == 0:
        return SoscReport(True, None, 0, 0, H, "critical cone is {0}")
    dirs = _sphere_directions(d, n_directions) @ Z.T
    if weak:
        A1 = np.stack([risk_gradient(problem, theta_bar, 1 + i) for i in weak])
        keep = np.all(dirs @ A1.T <= 1e-10, axis=1)
        dirs = dirs[keep]
    if dirs.shape[0] == 0:
        return SoscReport(True, None, d, 0, H, "no sampled direction lies in the cone")
    curv = np.einsum("ij,jk,ik->i", dirs, H, dirs) / np.sum(dirs * dirs, axis=1)
    min_curv = float(curv.min())
    return SoscReport(min_curv > curvature_tol, min_curv, d, dirs.shape[0], H)
