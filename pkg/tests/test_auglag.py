import numpy as np
import pytest

from auglearn.auglag import (
    DualState,
    augmented_lagrangian,
    augmented_lagrangian_grad,
    augmented_lagrangian_value_and_grad,
    penalty_kernel,
    scaled_penalty,
    standard_lagrangian,
)
from auglearn.problems import AnalyticRisk, ConstrainedProblem, ParamDomain, toy_qp

from conftest import fd_grad, rel_err


def test_kernel_values():
    assert penalty_kernel(0.0, 0.0) == 0.0
    assert penalty_kernel(-1.0, 1.0) == -0.25  # 2x + y = -1 <= 0, so -y^2/4
    assert penalty_kernel(1.0, 1.0) == 2.0  # (3^2 - 1) / 4


def test_kernel_matches_shifted_quadratic_form():
    # alpha * kernel(x, lam/alpha) == [max(0, lam + 2 alpha x)^2 - lam^2] / (4 alpha)
    rng = np.random.default_rng(0)
    x = rng.uniform(-5, 5, size=10_000)
    lam = rng.uniform(0, 10, size=10_000)
    alpha = 10.0 ** rng.uniform(-2, 4, size=10_000)
    direct = alpha * penalty_kernel(x, lam / alpha)
    stable = scaled_penalty(x, lam, alpha)
    assert np.max(np.abs(direct - stable)) < 1e-12 * np.maximum(1.0, np.abs(stable)).max()


def test_scaled_penalty_requires_positive_alpha():
    with pytest.raises(ValueError):
        scaled_penalty(1.0, 1.0, 0.0)


def test_dual_state_validation():
    with pytest.raises(ValueError):
        DualState([0.0], 0.0)
    with pytest.raises(ValueError):
        DualState([np.inf], 1.0)
    d = DualState([1.0, 2.0], 3.0)
    assert d.m == 2


def test_augmented_lagrangian_examples():
    p = toy_qp()
    # active constraint, zero multiplier
    assert augmented_lagrangian(p, [1.0], DualState([0.0], 1.0)) == 1.0
    # hand evaluation: 0 + 0.5 * psi(1, 2) = 0.5 * (16 - 4) / 4 = 1.5
    assert augmented_lagrangian(p, [0.0], DualState([1.0], 0.5)) == 1.5


def test_augmented_lagrangian_no_constraints():
    p = ConstrainedProblem(
        AnalyticRisk(lambda t: t[0] ** 2, lambda t: np.array([2 * t[0]])),
        [],
        ParamDomain(1),
    )
    d = DualState(np.zeros(0), 2.0)
    assert augmented_lagrangian(p, [1.5], d) == 1.5**2
    assert augmented_lagrangian_grad(p, [1.5], d) == pytest.approx([3.0])


def test_gradient_examples():
    p = toy_qp()
    # hand chain rule: 0 + max(0, 1 + 1) * (-1) = -2
    assert augmented_lagrangian_grad(p, [0.0], DualState([1.0], 0.5)) == pytest.approx([-2.0])
    # inactive constraint contributes nothing: at theta = 2, l1 = -1,
    # 2*alpha*l1 + lam = -2 + 0.5 < 0 so only the objective term remains
    g = augmented_lagrangian_grad(p, [2.0], DualState([0.5], 1.0))
    assert g == pytest.approx([4.0])


def _random_quadratic_problem(rng, dim=5, m=3):
    risks = []
    for _ in range(m + 1):
        A = rng.normal(size=(dim, dim))
        A = A @ A.T / dim + np.eye(dim) * 0.1
        b = rng.normal(size=dim)
        c = rng.normal()
        risks.append(
            AnalyticRisk(
                lambda t, A=A, b=b, c=c: 0.5 * t @ A @ t + b @ t + c,
                lambda t, A=A, b=b: A @ t + b,
            )
        )
    return ConstrainedProblem(risks[0], risks[1:], ParamDomain(dim))


def test_gradient_matches_finite_differences_random_problem():
    rng = np.random.default_rng(42)
    p = _random_quadratic_problem(rng)
    for _ in range(20):
        theta = rng.normal(size=5)
        dual = DualState(rng.uniform(0, 3, size=3), 10.0 ** rng.uniform(-1, 2))
        g = augmented_lagrangian_grad(p, theta, dual)
        gf = fd_grad(lambda t: augmented_lagrangian(p, t, dual), theta)
        assert rel_err(g, gf) < 1e-4


def test_value_and_grad_consistency():
    rng = np.random.default_rng(5)
    p = _random_quadratic_problem(rng)
    theta = rng.normal(size=5)
    dual = DualState([0.5, 0.0, 2.0], 3.0)
    v, g, slacks = augmented_lagrangian_value_and_grad(p, theta, dual)
    assert v == pytest.approx(augmented_lagrangian(p, theta, dual))
    assert np.allclose(g, augmented_lagrangian_grad(p, theta, dual))
    assert slacks.shape == (3,)


def test_standard_lagrangian_examples():
    p = toy_qp()
    assert standard_lagrangian(p, [0.7], np.zeros(1)) == pytest.approx(0.49)
    assert standard_lagrangian(p, [0.0], [2.0]) == 2.0
    with pytest.raises(ValueError, match="nonnegative"):
        standard_lagrangian(p, [0.0], [-0.5])


def test_majorization_over_standard():
    # alpha * psi(x, lam/alpha) >= lam * x for lam >= 0, on a dense random grid
    rng = np.random.default_rng(9)
    x = rng.uniform(-4, 4, size=10_000)
    lam = rng.uniform(0, 8, size=10_000)
    alpha = 10.0 ** rng.uniform(-2, 3, size=10_000)
    assert np.all(scaled_penalty(x, lam, alpha) >= lam * x - 1e-10)


def test_feasible_point_bound():
    # at a feasible point the penalty sum is <= 0, so L <= objective
    rng = np.random.default_rng(12)
    x = rng.uniform(-4, 0, size=5000)  # feasible constraint values
    lam = rng.uniform(0, 8, size=5000)
    alpha = 10.0 ** rng.uniform(-2, 3, size=5000)
    assert np.all(scaled_penalty(x, lam, alpha) <= 1e-12)


def test_monotone_in_alpha():
    rng = np.random.default_rng(21)
    p = toy_qp()
    for _ in range(200):
        theta = rng.uniform(-3, 3, size=1)
        lam = rng.uniform(0, 5, size=1)
        a1, a2 = sorted(10.0 ** rng.uniform(-2, 3, size=2))
        v1 = augmented_lagrangian(p, theta, DualState(lam, a1))
        v2 = augmented_lagrangian(p, theta, DualState(lam, a2))
        assert v2 >= v1 - 1e-10


def test_multiplier_length_checked():
    p = toy_qp()
    with pytest.raises(ValueError, match="constraints"):
        augmented_lagrangian(p, [0.0], DualState([1.0, 2.0], 1.0))
