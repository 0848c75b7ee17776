"""Centralized ground truth for the allocation problem.

At the optimum every scaled gradient ``grad f_i(x_i) / a_i`` equals a common
multiplier ``phi``.  For coordinate-separable costs this reduces to ``d``
independent scalar problems: for a trial ``phi_p`` each agent inverts its
own (strictly increasing) coordinate gradient at ``phi_p * a_i``, and
``h(phi_p) = sum_i a_i x_ip(phi_p) - b_p`` is strictly increasing in
``phi_p``.  Both levels are solved by bracketed bisection.

Nothing here touches the distributed dynamics, so the result is an
independent reference for the simulator.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .costs import LocalCost
from .errors import ParameterError, PreconditionError, UnboundedGradientError
from .problem import AllocationProblem

__all__ = ["KktSolution", "invert_gradient", "solve_kkt", "optimal_value_trace"]

log = logging.getLogger(__name__)

_MAX_DOUBLINGS = 60
_MAX_BISECT = 2000


def _bracket(fn: Callable, target: np.ndarray, lo0: float = -1.0, hi0: float = 1.0):
    """Grow ``[lo, hi]`` elementwise until ``fn(lo) <= target <= fn(hi)``."""
    shape = target.shape
    lo = np.full(shape, lo0, dtype=float)
    hi = np.full(shape, hi0, dtype=float)
    for _ in range(_MAX_DOUBLINGS + 1):
        f_lo, f_hi = fn(lo), fn(hi)
        need_hi = f_hi < target
        need_lo = f_lo > target
        if not (need_hi.any() or need_lo.any()):
            return lo, hi
        # move the far end out and the near end in to the last known value
        width = hi - lo
        lo = np.where(need_hi, hi, lo)
        hi = np.where(need_hi, hi + 2.0 * width, hi)
        hi = np.where(need_lo, lo, hi)
        lo = np.where(need_lo, lo - 2.0 * width, lo)
    raise UnboundedGradientError(
        "could not bracket the gradient target within 2^60 expansion; "
        "the cost is not strictly convex or the target is unreachable"
    )


def _bisect(fn: Callable, target: np.ndarray, lo: np.ndarray, hi: np.ndarray, rtol: float):
    """Elementwise bisection for ``fn(x) == target`` with ``fn`` increasing."""
    lo, hi = lo.copy(), hi.copy()
    for _ in range(_MAX_BISECT):
        mid = lo + 0.5 * (hi - lo)
        collapsed = (mid == lo) | (mid == hi)
        f_mid = fn(mid)
        below = f_mid < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        done = np.abs(f_mid - target) <= rtol * (1.0 + np.abs(target))
        if np.all(done | collapsed):
            break
    err_lo = np.abs(fn(lo) - target)
    err_hi = np.abs(fn(hi) - target)
    x = np.where(err_lo <= err_hi, lo, hi)
    return x, lo, hi


def _newton_polish(fn, target, x, lo, hi, steps=2):
    # safeguarded Newton with a central-difference slope; keeps the iterate
    # inside the bisection bracket and only accepts improving steps
    for _ in range(steps):
        f = fn(x)
        h = 1e-7 * (1.0 + np.abs(x))
        slope = (fn(x + h) - fn(x - h)) / (2.0 * h)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = x - (f - target) / slope
        ok = np.isfinite(cand) & (cand >= lo) & (cand <= hi)
        cand = np.where(ok, cand, x)
        better = np.abs(fn(cand) - target) < np.abs(f - target)
        x = np.where(better, cand, x)
    return x


def _solve_monotone(fn, target, rtol=1e-12, lo0=-1.0, hi0=1.0):
    lo, hi = _bracket(fn, target, lo0, hi0)
    x, lo, hi = _bisect(fn, target, lo, hi, rtol)
    return _newton_polish(fn, target, x, lo, hi)


def invert_gradient(cost: LocalCost, p: int, target: float, rtol: float = 1e-12) -> float:
    """Solve ``d static / d x_p (x_p) == target`` for a separable cost.

    Other coordinates are held at zero; separability makes their value
    irrelevant.
    """
    if not cost.separable:
        raise PreconditionError("gradient inversion requires a coordinate-separable cost")
    if not 0 <= p < cost.dim:
        raise ParameterError(f"coordinate {p} out of range for dimension {cost.dim}")
    x = np.zeros(cost.dim)

    def coord_grad(v):
        x[p] = v[()]
        return np.asarray(cost.grad(x)[p])

    return float(_solve_monotone(coord_grad, np.asarray(float(target)), rtol))


@dataclass(frozen=True, eq=False)
class KktSolution:
    X_star: np.ndarray
    phi_star: np.ndarray
    residual: float
    f_star: float
    tol: float

    def gradient_error(self, problem: AllocationProblem) -> float:
        """``max_i ||grad f_i(x*_i) - phi* a_i||_inf``."""
        G = problem.stack.grad(self.X_star)
        return float(np.max(np.abs(G - np.outer(self.phi_star, problem.a))))

    def is_valid(self, problem: AllocationProblem, tol: float | None = None) -> bool:
        tol = self.tol if tol is None else tol
        ok_grad = self.gradient_error(problem) <= tol
        ok_feas = self.residual <= tol * (1.0 + np.linalg.norm(problem.b))
        return bool(ok_grad and ok_feas)

    def to_csv(self, path) -> None:
        """Rows ``agent,coordinate,x_star`` then ``phi_star,coordinate,value``."""
        d, n = self.X_star.shape
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["agent", "coordinate", "x_star"])
            for i in range(n):
                for p in range(d):
                    w.writerow([i, p, repr(float(self.X_star[p, i]))])
            for p in range(d):
                w.writerow(["phi_star", p, repr(float(self.phi_star[p]))])


def solve_kkt(problem: AllocationProblem, tol: float = 1e-10, phi_bracket=(-1.0, 1.0)) -> KktSolution:
    """Unique optimum ``X*`` and multiplier ``phi*`` of a separable problem.

    Both bisection levels run to the resolution of double precision; ``tol``
    is the accuracy the returned solution is checked against (a warning is
    logged if it is missed).
    """
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    if not problem.stack.separable:
        raise PreconditionError(
            "the KKT oracle supports coordinate-separable costs only; "
            "coupled coordinates would need a d-dimensional multiplier solve"
        )
    a, b = problem.a, problem.b
    d = problem.d
    grad = problem.stack.grad

    def allocation(phi):
        target = np.outer(phi, a)
        return _solve_monotone(grad, target)

    def h(phi):
        return allocation(phi) @ a - b

    lo, hi = _bracket(h, np.zeros(d), *phi_bracket)
    phi, lo, hi = _bisect(h, np.zeros(d), lo, hi, rtol=0.0)
    X = allocation(phi)
    residual = float(np.linalg.norm(X @ a - b))
    f_star = float(np.sum(problem.stack.static(X)))
    sol = KktSolution(X, phi, residual, f_star, tol)
    if not sol.is_valid(problem):
        log.warning(
            "KKT solution misses tol=%g: gradient error %.3g, residual %.3g",
            tol, sol.gradient_error(problem), residual,
        )
    return sol


def optimal_value_trace(problem: AllocationProblem, solution: KktSolution, times: Sequence[float]) -> np.ndarray:
    """``F*(t) = sum_i static_i(x*_i) + sum_i time_i(t)``; the optimizer itself does not move."""
    stack = problem.stack
    return np.array([solution.f_star + float(np.sum(stack.time(t))) for t in times])
