"""Numerical kernel shared by the models: activations, initialization,
optimizers and a finite-difference gradient checker.

Parameters are plain ``dict[str, np.ndarray]`` (float64); gradients use the
same keys. Optimizers update the arrays in place.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Params = dict[str, np.ndarray]


def _check_finite(x: np.ndarray, what: str = "input") -> None:
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite {what}")


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    # exp of a non-positive argument only
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def log_sigmoid(x):
    return -np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))


def activation(kind: str, x):
    x = np.asarray(x, dtype=np.float64)
    _check_finite(x)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return np.tanh(x)
    raise ValueError(f"unknown activation {kind!r}")


def activation_grad(kind: str, y):
    """Derivative expressed through the activation's output ``y``."""
    if kind == "sigmoid":
        return y * (1.0 - y)
    if kind == "tanh":
        return 1.0 - y * y
    raise ValueError(f"unknown activation {kind!r}")


def log_softmax(z, axis=-1):
    z = np.asarray(z, dtype=np.float64)
    m = np.max(z, axis=axis, keepdims=True)
    s = z - m
    return s - np.log(np.sum(np.exp(s), axis=axis, keepdims=True))


def softmax(z, axis=-1):
    return np.exp(log_softmax(z, axis=axis))


def logsumexp(a) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    m = a.max()
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.sum(np.exp(a - m))))


def log_mean_exp(a) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    return logsumexp(a) - math.log(a.size)


def init_params(shape, scheme: str, rng: np.random.Generator) -> np.ndarray:
    """``uniform_fan``: U(-a, a), a = sqrt(6 / (fan_in + fan_out)); ``zeros``."""
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    if any(s < 1 for s in shape):
        raise ValueError(f"non-positive dimension in {shape}")
    if scheme == "zeros":
        return np.zeros(shape)
    if scheme == "uniform_fan":
        fan_out = shape[0]
        fan_in = shape[1] if len(shape) > 1 else shape[0]
        a = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-a, a, size=shape)
    raise ValueError(f"unknown init scheme {scheme!r}")


def _check_shapes(params: Params, grads: Params) -> None:
    for name, g in grads.items():
        if name not in params:
            raise ValueError(f"gradient for unknown parameter {name!r}")
        if params[name].shape != g.shape:
            raise ValueError(f"shape mismatch for {name!r}: {params[name].shape} vs {g.shape}")


def sgd_step(params: Params, grads: Params, lr: float) -> Params:
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    _check_shapes(params, grads)
    for name, g in grads.items():
        params[name] -= lr * g
        _check_finite(params[name], f"parameter {name!r} after update")
    return params


@dataclass
class SGD:
    lr: float = 0.01
    kind: str = field(default="sgd", init=False)

    def step(self, params: Params, grads: Params) -> Params:
        return sgd_step(params, grads, self.lr)


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)
    kind: str = field(default="adam", init=False)

    def __post_init__(self):
        if self.lr < 0 or not (0 <= self.beta1 < 1) or not (0 <= self.beta2 < 1) or self.eps <= 0:
            raise ValueError("invalid Adam hyper-parameters")

    def step(self, params: Params, grads: Params) -> Params:
        return adam_step(self, params, grads)


def adam_step(state: Adam, params: Params, grads: Params) -> Params:
    """Bias-corrected Adam update; parameters without a gradient keep their moments."""
    _check_shapes(params, grads)
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for name, g in grads.items():
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        params[name] -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        _check_finite(params[name], f"parameter {name!r} after update")
    return params


def make_optimizer(kind: str, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    if kind == "sgd":
        return SGD(lr)
    if kind == "adam":
        return Adam(lr, beta1, beta2, eps)
    raise ValueError(f"unknown optimizer {kind!r}")


# -- gradient checking -------------------------------------------------------

@dataclass
class GradcheckReport:
    max_rel_error: float
    per_param: dict[str, float]
    n_checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def gradcheck(
    loss_and_grad: Callable[[Params], tuple[float, Params]],
    params: Params,
    epsilon: float = 1e-5,
    tolerance: float = 1e-4,
    max_coords: int | None = 200,
    rng: np.random.Generator | None = None,
) -> GradcheckReport:
    """Compare analytic gradients with central differences.

    ``loss_and_grad`` must read the arrays in ``params`` (which are perturbed
    in place and restored). Tensors larger than ``max_coords`` are checked on a
    random subset of coordinates. Relative error per coordinate is
    ``|ga - gn| / max(|ga|, |gn|, 1e-8)``.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError("epsilon must lie in [1e-7, 1e-3]")
    rng = rng or np.random.default_rng(0)
    loss0, analytic = loss_and_grad(params)
    loss1, _ = loss_and_grad(params)
    if loss0 != loss1:
        raise RuntimeError("loss function is not deterministic")
    per_param = {}
    n_checked = 0
    for name, arr in params.items():
        ga = analytic.get(name, np.zeros_like(arr))
        flat = arr.reshape(-1)
        idx = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            idx = rng.choice(flat.size, size=max_coords, replace=False)
        worst = 0.0
        for j in idx:
            orig = flat[j]
            flat[j] = orig + epsilon
            lp, _ = loss_and_grad(params)
            flat[j] = orig - epsilon
            lm, _ = loss_and_grad(params)
            flat[j] = orig
            gn = (lp - lm) / (2.0 * epsilon)
            a = ga.reshape(-1)[j]
            err = abs(a - gn) / max(abs(a), abs(gn), 1e-8)
            worst = max(worst, err)
        per_param[name] = worst
        n_checked += idx.size
    return GradcheckReport(max(per_param.values(), default=0.0), per_param, n_checked, tolerance)
