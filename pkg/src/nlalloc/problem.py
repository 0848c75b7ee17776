"""The resource allocation problem: minimize ``sum_i f_i(x_i, t)`` s.t. ``X a = b``."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .costs import CostStack, LocalCost
from .errors import DegenerateCouplingError, DimensionError, ParameterError

# coupling weights closer than this to zero make the allocation unbounded
A_MIN = 1e-6


@dataclass(frozen=True, eq=False)
class AllocationProblem:
    """``n`` agents with ``d``-dimensional states coupled by ``X @ a == b``.

    Parameters
    ----------
    costs : sequence of LocalCost
        One cost per agent, all of the same dimension ``d``.
    a : array_like, shape (n,)
        Coupling weights; none may be within ``1e-6`` of zero.
    b : array_like, shape (d,)
        Resource total. A scalar is accepted when ``d == 1``.
    """

    costs: tuple
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        costs = tuple(self.costs)
        if not costs:
            raise DimensionError("problem needs at least one agent")
        if not all(isinstance(c, LocalCost) for c in costs):
            raise ParameterError("costs must be LocalCost instances")
        a = np.atleast_1d(np.asarray(self.a, dtype=float)).copy()
        b = np.atleast_1d(np.asarray(self.b, dtype=float)).copy()
        if a.shape != (len(costs),):
            raise DimensionError(f"a has shape {a.shape}, expected ({len(costs)},)")
        d = costs[0].dim
        if b.shape != (d,):
            raise DimensionError(f"b has shape {b.shape}, expected ({d},)")
        if np.any(np.abs(a) < A_MIN):
            raise DegenerateCouplingError(f"coupling weights must satisfy |a_i| >= {A_MIN}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ParameterError("a and b must be finite")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        # builds the stack, which also checks all costs share d
        _ = self.stack

    @cached_property
    def stack(self) -> CostStack:
        return CostStack(self.costs)

    @property
    def n(self) -> int:
        return len(self.costs)

    @property
    def d(self) -> int:
        return self.stack.d

    def check_state(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1 and self.d == 1:
            X = X[None, :]
        if X.shape != (self.d, self.n):
            raise DimensionError(f"state has shape {X.shape}, expected {(self.d, self.n)}")
        return X

    def scaled_gradients(self, X) -> np.ndarray:
        """``grad f_i(x_i) / a_i`` as a ``d x n`` matrix."""
        return self.stack.grad(X) / self.a

    def static_total(self, X) -> float:
        return float(np.sum(self.stack.static(self.check_state(X))))

    def total(self, X, t: float = 0.0) -> float:
        return self.stack.total(self.check_state(X), t)


def make_problem(costs: Sequence[LocalCost], a, b) -> AllocationProblem:
    return AllocationProblem(tuple(costs), a, b)
