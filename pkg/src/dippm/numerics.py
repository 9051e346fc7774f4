"""Dense float64 kernels, Huber loss, Adam, and a gradient checker.

Matrices are plain 2-D numpy float64 arrays (row-major); vectors are 1-D.
Everything is deterministic: stochastic ops take an explicit
numpy.random.Generator (PCG64 via numpy.random.default_rng).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFinite, ShapeMismatch

# Adam defaults used throughout training.
DEFAULT_LEARNING_RATE = 2.754e-5
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeMismatch(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul inner dims differ: {a.shape} x {b.shape}")
    return a @ b


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise ShapeMismatch(f"add shapes differ: {a.shape} vs {b.shape}")
    return a + b


def scale(a: np.ndarray, s: float) -> np.ndarray:
    return a * float(s)


def relu(a: np.ndarray) -> np.ndarray:
    return np.maximum(a, 0.0)


def dropout_mask(shape, p: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask: entries are 0 with probability p, else 1/(1-p).

    p = 0 yields all ones, so eval and p=0 train paths coincide.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if p == 0.0:
        return np.ones(shape, dtype=np.float64)
    keep = rng.random(shape) >= p
    return keep.astype(np.float64) / (1.0 - p)


def huber_loss(pred: np.ndarray, target: np.ndarray, delta: float = 1.0) -> tuple[float, np.ndarray]:
    """Mean Huber loss and its gradient w.r.t. pred.

    Elementwise 0.5*r^2 for |r| <= delta, else delta*(|r| - 0.5*delta),
    with r = pred - target; the mean runs over all elements.
    """
    if pred.shape != target.shape:
        raise ShapeMismatch(f"huber shapes differ: {pred.shape} vs {target.shape}")
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    r = pred - target
    a = np.abs(r)
    quadratic = a <= delta
    elems = np.where(quadratic, 0.5 * r * r, delta * (a - 0.5 * delta))
    grad = np.where(quadratic, r, delta * np.sign(r)) / r.size
    return float(elems.mean()), grad


@dataclass
class AdamState:
    """Per-parameter Adam moments. One owner mutates it; never share."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = DEFAULT_LEARNING_RATE
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_param(cls, shape, lr: float = DEFAULT_LEARNING_RATE) -> "AdamState":
        return cls(m=np.zeros(shape, dtype=np.float64), v=np.zeros(shape, dtype=np.float64), lr=lr)


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState) -> np.ndarray:
    """One bias-corrected Adam update; returns the new parameter value.

    The state's moments and step counter are updated in place.
    """
    if param.shape != grad.shape or state.m.shape != param.shape:
        raise ShapeMismatch(f"adam shapes differ: param {param.shape}, grad {grad.shape}, state {state.m.shape}")
    state.t += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grad
    tmp = grad * grad
    tmp *= 1.0 - state.beta2
    state.v *= state.beta2
    state.v += tmp
    denom = state.v / (1.0 - state.beta2 ** state.t)
    np.sqrt(denom, out=denom)
    denom += state.eps
    step = state.m / (1.0 - state.beta1 ** state.t)
    step /= denom
    step *= -state.lr
    step += param
    return step


def finite_diff_check(f, params: list[np.ndarray], analytic_grads: list[np.ndarray], h: float = 1e-5) -> float:
    """Max relative error between central differences of f and analytic grads.

    f is called as f(params) and must be deterministic (disable dropout).
    Parameters are perturbed in place coordinate by coordinate and restored,
    so the caller's arrays are unchanged on return. The relative error for one
    coordinate is |fd - analytic| / max(1, |fd|, |analytic|).
    """
    if h <= 0:
        raise ValueError(f"step size must be positive, got {h}")
    if len(params) != len(analytic_grads):
        raise ShapeMismatch("params and analytic_grads differ in length")
    worst = 0.0
    for param, grad in zip(params, analytic_grads):
        if param.shape != grad.shape:
            raise ShapeMismatch(f"gradient shape {grad.shape} does not match parameter {param.shape}")
        for idx in np.ndindex(param.shape):
            original = param[idx]
            param[idx] = original + h
            f_plus = float(f(params))
            param[idx] = original - h
            f_minus = float(f(params))
            param[idx] = original
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NonFinite(f"loss not finite around parameter index {idx}")
            fd = (f_plus - f_minus) / (2.0 * h)
            err = abs(fd - grad[idx]) / max(1.0, abs(fd), abs(grad[idx]))
            if err > worst:
                worst = err
    return worst
