"""Local costs ``f_i(x, t) = static(x) + time_part(t)`` and box-penalty embedding.

Every cost class knows how to evaluate a whole *batch* of instances of its
own type at once (``d x k`` state columns).  :class:`CostStack` groups a list
of heterogeneous costs by batch key so the simulator evaluates all agent
gradients with a handful of array operations per step.  The single-instance
methods (``static``, ``grad``) run through the same batched code path with
``k = 1``, so there is exactly one implementation of each formula.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import DimensionError, ParameterError

__all__ = [
    "softplus",
    "LocalCost",
    "QuadraticCost",
    "LogSumExpQuadCost",
    "PenalizedCost",
    "CostStack",
    "grad_static",
    "eval_total",
    "penalize",
    "make_f2_cost",
    "make_agc_costs",
    "F2_RANGES",
    "AGC_RANGES",
    "monotone_gradient_probe",
]


def softplus(u):
    """Overflow-safe ``log(1 + exp(u))``."""
    u = np.asarray(u, dtype=float)
    return np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))


def _vec(x, d=None, name="x"):
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be a vector, got shape {arr.shape}")
    if d is not None:
        if arr.size == 1 and d > 1:
            arr = np.full(d, arr[0])
        elif arr.size != d:
            raise DimensionError(f"{name} has length {arr.size}, expected {d}")
    return arr


class _Batch:
    """Vectorized evaluation of ``k`` costs on a ``d x k`` state block."""

    def grad(self, X):
        raise NotImplementedError

    def static(self, X):
        raise NotImplementedError

    def time(self, t):
        raise NotImplementedError


class _LoopBatch(_Batch):
    # fallback for user-defined LocalCost subclasses without a batched form
    def __init__(self, costs):
        self.costs = list(costs)

    def grad(self, X):
        return np.column_stack([c.grad(X[:, k]) for k, c in enumerate(self.costs)])

    def static(self, X):
        return np.array([c.static(X[:, k]) for k, c in enumerate(self.costs)])

    def time(self, t):
        return np.array([c.time_part(t) for c in self.costs])


class LocalCost:
    """A cost ``f(x, t) = static(x) + time_part(t)`` on ``R^d``.

    Subclasses must provide a strictly convex, differentiable ``static`` part
    and its gradient.  ``separable`` declares that coordinate ``p`` of the
    gradient depends on ``x[p]`` only, which the KKT oracle requires.
    """

    dim: int = 1
    separable: bool = False

    def static(self, x) -> float:
        raise NotImplementedError

    def grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def time_part(self, t) -> float:
        return 0.0

    def value(self, x, t=0.0) -> float:
        return self.static(x) + self.time_part(t)

    def __call__(self, x, t=0.0) -> float:
        return self.value(x, t)

    def batch_key(self):
        return type(self)

    @classmethod
    def make_batch(cls, costs) -> _Batch:
        return _LoopBatch(costs)


class _BatchedCost(LocalCost):
    # shared single-instance plumbing for costs that implement make_batch

    @cached_property
    def _self_batch(self):
        return type(self).make_batch([self])

    def _col(self, x):
        return _vec(x, self.dim)[:, None]

    def static(self, x) -> float:
        return float(self._self_batch.static(self._col(x))[0])

    def grad(self, x) -> np.ndarray:
        return self._self_batch.grad(self._col(x))[:, 0]

    def time_part(self, t) -> float:
        return float(self._self_batch.time(t)[0])


def _stack(costs, attr):
    return np.column_stack([getattr(c, attr) for c in costs])


@dataclass(frozen=True, eq=False)
class QuadraticCost(_BatchedCost):
    """``sum_p gamma_p x_p^2 + beta_p x_p + alpha_p`` (no time-varying part)."""

    gamma: np.ndarray
    beta: np.ndarray = 0.0
    alpha: np.ndarray = 0.0

    separable = True

    def __post_init__(self):
        gamma = _vec(self.gamma, name="gamma")
        d = gamma.size
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "beta", _vec(self.beta, d, "beta"))
        object.__setattr__(self, "alpha", _vec(self.alpha, d, "alpha"))
        if np.any(gamma <= 0):
            raise ParameterError("gamma must be positive for strict convexity")

    @property
    def dim(self):
        return self.gamma.size

    @classmethod
    def make_batch(cls, costs):
        return _QuadBatch(_stack(costs, "gamma"), _stack(costs, "beta"), _stack(costs, "alpha"))


class _QuadBatch(_Batch):
    def __init__(self, gamma, beta, alpha):
        self.gamma, self.beta, self.alpha = gamma, beta, alpha

    def grad(self, X):
        return 2.0 * self.gamma * X + self.beta

    def static(self, X):
        return np.sum(self.gamma * X * X + self.beta * X + self.alpha, axis=0)

    def time(self, t):
        return np.zeros(self.gamma.shape[1])


@dataclass(frozen=True, eq=False)
class LogSumExpQuadCost(_BatchedCost):
    r"""Per coordinate ``a (x - c)^2 + log(1 + exp(b (x - d)))``, plus ``e sin(w t + phi)``.

    All seven fields are length-``d`` vectors; ``a_bar > 0`` makes the static
    part strictly convex regardless of ``b_bar``.
    """

    a_bar: np.ndarray
    b_bar: np.ndarray
    c_bar: np.ndarray
    d_bar: np.ndarray
    e_bar: np.ndarray
    freq: np.ndarray
    phase: np.ndarray

    separable = True

    def __post_init__(self):
        a_bar = _vec(self.a_bar, name="a_bar")
        d = a_bar.size
        object.__setattr__(self, "a_bar", a_bar)
        for name in ("b_bar", "c_bar", "d_bar", "e_bar", "freq", "phase"):
            object.__setattr__(self, name, _vec(getattr(self, name), d, name))
        if np.any(a_bar <= 0):
            raise ParameterError("a_bar must be positive for strict convexity")

    @property
    def dim(self):
        return self.a_bar.size

    @classmethod
    def make_batch(cls, costs):
        names = ("a_bar", "b_bar", "c_bar", "d_bar", "e_bar", "freq", "phase")
        return _LseBatch(*(_stack(costs, n) for n in names))


class _LseBatch(_Batch):
    def __init__(self, a, b, c, d, e, w, phi):
        self.a, self.b, self.c, self.d, self.e, self.w, self.phi = a, b, c, d, e, w, phi

    def grad(self, X):
        return 2.0 * self.a * (X - self.c) + self.b * expit(self.b * (X - self.d))

    def static(self, X):
        quad = self.a * (X - self.c) ** 2
        return np.sum(quad + softplus(self.b * (X - self.d)), axis=0)

    def time(self, t):
        return np.sum(self.e * np.sin(self.w * t + self.phi), axis=0)


@dataclass(frozen=True, eq=False)
class PenalizedCost(_BatchedCost):
    """``base`` plus smooth barriers ``eps * softplus(mu * u) / mu`` on both box sides.

    The gradient contribution is ``eps * sigmoid(mu (x - upper))`` minus
    ``eps * sigmoid(mu (lower - x))``, elementwise.
    """

    base: LocalCost
    lower: np.ndarray
    upper: np.ndarray
    eps: float = 10.0
    mu: float = 20.0

    def __post_init__(self):
        d = self.base.dim
        lower = _vec(self.lower, d, "lower")
        upper = _vec(self.upper, d, "upper")
        if np.any(lower >= upper):
            raise ParameterError("lower bound must be strictly below upper bound in every coordinate")
        if not (self.eps > 0 and self.mu > 0):
            raise ParameterError("penalty weight eps and sharpness mu must be positive")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def dim(self):
        return self.base.dim

    @property
    def separable(self):
        return self.base.separable

    def batch_key(self):
        return (PenalizedCost, self.base.batch_key())

    @classmethod
    def make_batch(cls, costs):
        base = type(costs[0].base).make_batch([c.base for c in costs])
        d = costs[0].dim
        eps = np.tile([c.eps for c in costs], (d, 1))
        mu = np.tile([c.mu for c in costs], (d, 1))
        return _PenaltyBatch(base, _stack(costs, "lower"), _stack(costs, "upper"), eps, mu)


class _PenaltyBatch(_Batch):
    def __init__(self, base, lower, upper, eps, mu):
        self.base, self.lower, self.upper, self.eps, self.mu = base, lower, upper, eps, mu

    def grad(self, X):
        up = expit(self.mu * (X - self.upper))
        lo = expit(self.mu * (self.lower - X))
        return self.base.grad(X) + self.eps * (up - lo)

    def static(self, X):
        barrier = softplus(self.mu * (X - self.upper)) + softplus(self.mu * (self.lower - X))
        return self.base.static(X) + np.sum(self.eps * barrier / self.mu, axis=0)

    def time(self, t):
        return self.base.time(t)


class CostStack:
    """Batched evaluation of ``n`` local costs on a ``d x n`` state matrix."""

    def __init__(self, costs: Sequence[LocalCost]):
        costs = list(costs)
        if not costs:
            raise DimensionError("need at least one cost")
        d = costs[0].dim
        if any(c.dim != d for c in costs):
            raise DimensionError("all costs must share the same dimension")
        self.costs = costs
        self.d, self.n = d, len(costs)
        groups: dict = {}
        for i, c in enumerate(costs):
            groups.setdefault(c.batch_key(), []).append(i)
        self._groups = []
        for idx in groups.values():
            members = [costs[i] for i in idx]
            self._groups.append((np.array(idx), type(members[0]).make_batch(members)))
        self._single = len(self._groups) == 1
        self.separable = all(c.separable for c in costs)

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape != (self.d, self.n):
            raise DimensionError(f"state has shape {X.shape}, expected {(self.d, self.n)}")
        return X

    def grad(self, X) -> np.ndarray:
        if self._single:
            return self._groups[0][1].grad(X)
        out = np.empty((self.d, self.n))
        for idx, batch in self._groups:
            out[:, idx] = batch.grad(X[:, idx])
        return out

    def static(self, X) -> np.ndarray:
        """Per-agent static cost values."""
        out = np.empty(self.n)
        for idx, batch in self._groups:
            out[idx] = batch.static(X[:, idx])
        return out

    def time(self, t) -> np.ndarray:
        out = np.empty(self.n)
        for idx, batch in self._groups:
            out[idx] = batch.time(t)
        return out

    def total(self, X, t=0.0) -> float:
        X = self._check(X)
        return float(np.sum(self.static(X)) + np.sum(self.time(t)))


def grad_static(cost: LocalCost, x) -> np.ndarray:
    return cost.grad(x)


def eval_total(costs: Sequence[LocalCost], X, t: float = 0.0) -> float:
    """``sum_i f_i(x_i, t)`` for a ``d x n`` state matrix."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != len(costs):
        raise DimensionError(f"state with shape {X.shape} does not match {len(costs)} costs")
    return CostStack(costs).total(X, t)


def penalize(base: LocalCost, lower, upper, eps: float = 10.0, mu: float = 20.0) -> PenalizedCost:
    return PenalizedCost(base, lower, upper, eps, mu)


# Parameter ranges for randomly drawn log-sum-exp costs.
F2_RANGES = {
    "a_bar": (0.5, 2.0),
    "b_bar": (-1.0, 1.0),
    "c_bar": (-2.0, 2.0),
    "d_bar": (-2.0, 2.0),
    "e_bar": (0.0, 1.0),
    "freq": (0.1, 2.0),
    "phase": (0.0, 2 * np.pi),
}

# Stand-in generator cost coefficients ($/MW^2, $/MW, $).
AGC_RANGES = {
    "gamma": (0.02, 0.10),
    "beta": (15.0, 40.0),
    "alpha": (0.0, 100.0),
}


def make_f2_cost(n: int, seed=None, d: int = 4) -> list[LogSumExpQuadCost]:
    """``n`` random :class:`LogSumExpQuadCost` instances drawn from :data:`F2_RANGES`."""
    if n < 1 or d < 1:
        raise ParameterError("n and d must be positive")
    rng = np.random.default_rng(seed)
    draws = {k: rng.uniform(lo, hi, size=(n, d)) for k, (lo, hi) in F2_RANGES.items()}
    return [LogSumExpQuadCost(**{k: v[i] for k, v in draws.items()}) for i in range(n)]


def make_agc_costs(n: int, seed=None) -> list[QuadraticCost]:
    rng = np.random.default_rng(seed)
    draws = {k: rng.uniform(lo, hi, size=n) for k, (lo, hi) in AGC_RANGES.items()}
    return [QuadraticCost(draws["gamma"][i], draws["beta"][i], draws["alpha"][i]) for i in range(n)]


def monotone_gradient_probe(cost: LocalCost, n_pairs: int = 100, seed=None, scale: float = 3.0) -> bool:
    """Check ``(grad(y) - grad(x))_p (y - x)_p > 0`` for every coordinate on random pairs.

    This per-coordinate monotonicity holds for separable strictly convex
    costs; a failure indicates a non-convex or degenerate cost.
    """
    rng = np.random.default_rng(seed)
    for _ in range(n_pairs):
        x = rng.normal(scale=scale, size=cost.dim)
        y = rng.normal(scale=scale, size=cost.dim)
        prod = (cost.grad(y) - cost.grad(x)) * (y - x)
        if np.any(prod <= 0):
            return False
    return True
