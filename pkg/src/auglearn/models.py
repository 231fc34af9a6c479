"""Small sigmoid MLP classifier with manual backprop, plus the training risks
and fairness metrics: cross-entropy objective, counterfactual-invariance KL
constraints under protected-attribute flips, accuracy, and flip rates.

All forward/backward passes are vectorized over the sample batch; parameters
live in a single flat vector so the classifier plugs directly into the
constrained solvers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from .problems import EmpiricalRisk

DEFAULT_CLAMP_EPS = 1e-6


@dataclass(frozen=True)
class FlipTransform:
    """Single-variable modification of the protected block of the input.

    ``toggle`` replaces each listed 0/1 column by its complement (an
    involution); ``assign`` writes fixed values into the listed columns (a
    category substitution).  An empty index tuple is the identity.
    """

    name: str
    indices: tuple = ()
    mode: str = "toggle"
    values: Optional[tuple] = None

    def __post_init__(self):
        if self.mode not in ("toggle", "assign"):
            raise ValueError(f"unknown flip mode {self.mode!r}")
        if self.mode == "assign" and self.values is not None:
            if len(self.values) != len(self.indices):
                raise ValueError("assign flip needs one value per index")

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = X.copy()
        if not self.indices:
            return out
        idx = list(self.indices)
        if self.mode == "toggle":
            out[:, idx] = 1.0 - out[:, idx]
        else:
            out[:, idx] = np.asarray(self.values, dtype=float)
        return out


def identity_transform(name: str = "identity") -> FlipTransform:
    return FlipTransform(name=name, indices=())


@dataclass(frozen=True)
class FairnessConstraintSpec:
    """One invariance constraint per transform: mean KL divergence between the
    original and flipped predictions must stay below ``threshold``."""

    transforms: tuple
    threshold: float
    clamp_eps: float = 1e-6

    def __post_init__(self):
        if len(self.transforms) < 1:
            raise ValueError("at least one flip transform is required")
        if not self.threshold > 0:
            raise ValueError("sensitivity threshold must be positive")
        if not 0 < self.clamp_eps < 0.5:
            raise ValueError("probability clamp must lie in (0, 0.5)")

    def build_risks(self, mlp: "Mlp", X) -> list:
        return [
            kl_fairness_risk(mlp, X, flip, self.threshold, self.clamp_eps)
            for flip in self.transforms
        ]


class Mlp:
    """Feedforward net: sigmoid hidden layers, 2-class softmax output.

    Sigmoid keeps the map twice continuously differentiable in the
    parameters, which the second-order theory needs.  Weights and biases are
    flattened into one parameter vector in layer order (W then b per layer).
    """

    def __init__(self, input_dim: int, hidden: Sequence[int] = (16, 16), n_classes: int = 2):
        if n_classes != 2:
            raise ValueError("only two-class output is supported")
        self.sizes = (int(input_dim), *[int(h) for h in hidden], n_classes)
        self.shapes = [
            (self.sizes[i], self.sizes[i + 1]) for i in range(len(self.sizes) - 1)
        ]
        self.n_params = sum(a * b + b for a, b in self.shapes)

    def init_params(self, seed) -> np.ndarray:
        """Seeded uniform in [-0.5, 0.5] scaled by 1/sqrt(fan_in)."""
        rng = np.random.default_rng(seed)
        chunks = []
        for fan_in, fan_out in self.shapes:
            scale = 1.0 / np.sqrt(fan_in)
            chunks.append(rng.uniform(-0.5, 0.5, size=fan_in * fan_out) * scale)
            chunks.append(rng.uniform(-0.5, 0.5, size=fan_out) * scale)
        return np.concatenate(chunks)

    def unpack(self, theta: np.ndarray) -> list:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {theta.shape}")
        layers = []
        pos = 0
        for fan_in, fan_out in self.shapes:
            W = theta[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out)
            pos += fan_in * fan_out
            b = theta[pos : pos + fan_out]
            pos += fan_out
            layers.append((W, b))
        return layers

    def _forward_cached(self, theta, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {X.shape[1]} != expected {self.sizes[0]}")
        layers = self.unpack(theta)
        activations = [X]
        a = X
        for W, b in layers[:-1]:
            a = expit(a @ W + b)
            activations.append(a)
        W, b = layers[-1]
        logits = a @ W + b
        shifted = logits - logits.max(axis=1, keepdims=True)
        ex = np.exp(shifted)
        probs = ex / ex.sum(axis=1, keepdims=True)
        return probs, (layers, activations)

    def forward(self, theta, X) -> np.ndarray:
        """Class probabilities, shape (N, 2); accepts a single 1-D sample too."""
        x = np.asarray(X, dtype=float)
        single = x.ndim == 1
        probs, _ = self._forward_cached(theta, x)
        return probs[0] if single else probs

    def _backward(self, cache, dlogits) -> np.ndarray:
        """Flat parameter gradient from the output-logit gradient (summed over batch)."""
        layers, activations = cache
        grads = [None] * len(layers)
        delta = dlogits
        for l in range(len(layers) - 1, -1, -1):
            a_prev = activations[l]
            gW = a_prev.T @ delta
            gb = delta.sum(axis=0)
            grads[l] = (gW, gb)
            if l > 0:
                delta = (delta @ layers[l][0].T) * a_prev * (1.0 - a_prev)
        return np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in grads])


def _softmax_vjp(probs, dprobs):
    """Backprop dL/dprobs through the softmax to dL/dlogits."""
    t = dprobs * probs
    return t - probs * t.sum(axis=1, keepdims=True)


def cross_entropy_risk(mlp: Mlp, X, y, clamp_eps: float = DEFAULT_CLAMP_EPS) -> EmpiricalRisk:
    """Mean negative log-probability of the true class.

    Probabilities are clamped to [eps, 1-eps] inside the log, which both
    bounds the loss in [0, -log eps] and kills the gradient at the clamp.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=int)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must lie in {0, 1}")
    n = X.shape[0]
    rows = np.arange(n)

    def fused(theta):
        probs, cache = mlp._forward_cached(theta, X)
        p_true = probs[rows, y]
        pc = np.clip(p_true, clamp_eps, 1.0 - clamp_eps)
        losses = -np.log(pc)
        mask = (p_true > clamp_eps) & (p_true < 1.0 - clamp_eps)
        dlogits = probs.copy()
        dlogits[rows, y] -= 1.0
        dlogits *= mask[:, None]
        grad = mlp._backward(cache, dlogits / n)
        return losses, grad

    def sample_values(theta):
        probs, _ = mlp._forward_cached(theta, X)
        pc = np.clip(probs[rows, y], clamp_eps, 1.0 - clamp_eps)
        return -np.log(pc)

    return EmpiricalRisk(
        sample_values, n, fused=fused, bound=(0.0, -np.log(clamp_eps))
    )


def kl_fairness_risk(
    mlp: Mlp, X, flip: FlipTransform, threshold: float,
    clamp_eps: float = DEFAULT_CLAMP_EPS,
) -> EmpiricalRisk:
    """Mean KL(f(x) || f(flip(x))) minus the sensitivity threshold.

    The constraint "average counterfactual divergence <= threshold" becomes
    risk <= 0 in the solver's canonical form.  The KL direction is
    original-versus-flipped, unsymmetrized; probabilities on both sides are
    clamped, and the gradient flows through both forward passes.
    """
    if not threshold > 0:
        raise ValueError("sensitivity threshold must be positive")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Xf = flip.apply(X)
    n = X.shape[0]
    lo, hi = clamp_eps, 1.0 - clamp_eps

    def _kl_terms(theta):
        probs_p, cache_p = mlp._forward_cached(theta, X)
        probs_q, cache_q = mlp._forward_cached(theta, Xf)
        pc = np.clip(probs_p, lo, hi)
        qc = np.clip(probs_q, lo, hi)
        log_ratio = np.log(pc) - np.log(qc)
        kl = np.sum(pc * log_ratio, axis=1)
        return probs_p, cache_p, probs_q, cache_q, pc, qc, log_ratio, kl

    def fused(theta):
        probs_p, cache_p, probs_q, cache_q, pc, qc, log_ratio, kl = _kl_terms(theta)
        mask_p = (probs_p > lo) & (probs_p < hi)
        mask_q = (probs_q > lo) & (probs_q < hi)
        w_p = (log_ratio + 1.0) * mask_p
        w_q = (-pc / qc) * mask_q
        dlogits_p = _softmax_vjp(probs_p, w_p)
        dlogits_q = _softmax_vjp(probs_q, w_q)
        grad = mlp._backward(cache_p, dlogits_p / n) + mlp._backward(cache_q, dlogits_q / n)
        return kl, grad

    def sample_values(theta):
        return _kl_terms(theta)[-1]

    # threshold enters as an exact constant offset after the mean, so a model
    # with identical original/flipped outputs evaluates to exactly -threshold
    return EmpiricalRisk(
        sample_values,
        n,
        fused=fused,
        offset=-threshold,
        bound=(-threshold, 2.0 * (-np.log(clamp_eps)) - threshold),
    )


def accuracy(mlp: Mlp, theta, X, y) -> float:
    """Fraction of argmax-correct predictions; ties resolve to class 0."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=int)
    if X.shape[0] == 0:
        raise ValueError("empty dataset")
    preds = np.argmax(mlp.forward(theta, X), axis=1)
    return float(np.mean(preds == y))


def counterfactual_flip_rate(mlp: Mlp, theta, X, flip: FlipTransform) -> float:
    """Fraction of samples whose argmax prediction changes under the flip."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("empty dataset")
    a = np.argmax(mlp.forward(theta, X), axis=1)
    b = np.argmax(mlp.forward(theta, flip.apply(X)), axis=1)
    return float(np.mean(a != b))


def randomized_accuracy(mlp: Mlp, archive, t0: int, X, y, seed) -> float:
    """Accuracy of the randomized predictor: one archived iterate per sample."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=int)
    rng = np.random.default_rng(seed)
    idx = rng.integers(t0, len(archive), size=X.shape[0])
    correct = 0
    for j, i in enumerate(idx):
        p = mlp.forward(archive[i], X[j])
        correct += int(np.argmax(p) == y[j])
    return correct / X.shape[0]


def randomized_flip_rate(mlp: Mlp, archive, t0: int, X, flip: FlipTransform, seed) -> float:
    """Flip rate of the randomized predictor (same iterate for both inputs)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Xf = flip.apply(X)
    rng = np.random.default_rng(seed)
    idx = rng.integers(t0, len(archive), size=X.shape[0])
    flips = 0
    for j, i in enumerate(idx):
        a = np.argmax(mlp.forward(archive[i], X[j]))
        b = np.argmax(mlp.forward(archive[i], Xf[j]))
        flips += int(a != b)
    return flips / X.shape[0]
