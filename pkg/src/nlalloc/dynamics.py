"""Laplacian-gradient allocation dynamics and their diagnostics.

Agent ``i`` moves along

    xdot_i = -(1/a_i) * sum_j W_ij * g(grad f_i(x_i)/a_i - grad f_j(x_j)/a_j)

With a symmetric ``W`` and an odd ``g`` the pairwise terms cancel in
``sum_i a_i xdot_i``, so ``X a`` is conserved: a feasible start stays
feasible for all time.  Integration is fixed-step (explicit Euler or the
classical four-stage scheme) with the graph frozen over each step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import IntegrationError, ParameterError, PreconditionError
from .netgraph import GraphSchedule, WeightedGraph
from .oracle import KktSolution, solve_kkt
from .problem import AllocationProblem

__all__ = [
    "AllocationProblem",
    "SimConfig",
    "Trajectory",
    "rhs",
    "step",
    "simulate",
    "feasibility_residual",
    "gradient_consensus_residual",
    "lyapunov_residual",
    "sum_identity_gap",
    "project_feasible",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("t", "F", "F_star", "lyapunov", "feas_residual", "grad_consensus", "max_rate")


@dataclass(frozen=True)
class SimConfig:
    """Fixed-step integration settings.

    ``dt`` must divide the schedule dwell so that switches fall on step
    boundaries.  ``rate_clamp`` caps the per-step change to
    ``rate_clamp * dt * s0`` in the sup norm, where ``s0`` is the largest
    initial rate over the schedule's graphs; ``"auto"`` enables a factor of
    10 only for actuations with a sublinear power term, ``None`` disables it.
    The cap rescales the whole increment, so ``X a`` is still conserved.
    """

    dt: float
    horizon: float
    schedule: GraphSchedule
    g: Callable
    integrator: str = "euler"
    record_every: int = 1
    feasibility_correction: bool = False
    tol: float = 1e-6
    plateau_steps: Optional[int] = 1000
    rate_clamp: object = "auto"
    store_states: bool = True

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if not self.horizon > 0:
            raise ParameterError(f"horizon must be positive, got {self.horizon}")
        if self.integrator not in ("euler", "rk4"):
            raise ParameterError(f"integrator must be 'euler' or 'rk4', got {self.integrator!r}")
        if self.record_every < 1:
            raise ParameterError("record_every must be at least 1")
        if self.dt > self.schedule.dwell * (1 + 1e-12):
            raise ParameterError("dt must not exceed the schedule dwell")
        ratio = self.schedule.dwell / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ParameterError(f"dt={self.dt} must divide the dwell time {self.schedule.dwell}")

    @property
    def steps_per_dwell(self) -> int:
        return int(round(self.schedule.dwell / self.dt))

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def graph_for_step(self, k: int) -> WeightedGraph:
        return self.schedule.graphs[(k // self.steps_per_dwell) % len(self.schedule.graphs)]

    def clamp_factor(self) -> Optional[float]:
        if self.rate_clamp == "auto":
            return 10.0 if getattr(self.g, "sublinear", False) else None
        return None if self.rate_clamp is None else float(self.rate_clamp)


class _Flow:
    """Cached edge lists plus the vectorized right-hand side."""

    def __init__(self, problem: AllocationProblem, g: Callable):
        self.problem = problem
        self.g = g
        self._edge_cache: dict = {}

    def _edges(self, graph: WeightedGraph):
        key = id(graph)
        hit = self._edge_cache.get(key)
        if hit is None or hit[0] is not graph:
            ii, jj, w = graph.edges
            if ii.size:
                heads, starts = np.unique(ii, return_index=True)
            else:
                heads = starts = np.zeros(0, dtype=int)
            hit = (graph, ii, jj, w[:, None], heads, starts)
            self._edge_cache[key] = hit
        return hit[1:]

    def rate(self, X, graph):
        """Return ``(Xdot, S)`` where ``S`` holds the scaled gradients."""
        prob = self.problem
        S = prob.stack.grad(X) / prob.a
        ii, jj, w, heads, starts = self._edges(graph)
        Xdot = np.zeros_like(S)
        if ii.size:
            Z = (S[:, ii] - S[:, jj]).T
            terms = np.asarray(self.g(Z), dtype=float) * w
            acc = np.add.reduceat(terms, starts, axis=0)
            Xdot[:, heads] = -acc.T
            Xdot /= prob.a
        return Xdot, S


def rhs(X, graph: WeightedGraph, problem: AllocationProblem, g: Callable) -> np.ndarray:
    """Time derivative of the state matrix under ``graph``."""
    X = problem.check_state(X)
    return _Flow(problem, g).rate(X, graph)[0]


def project_feasible(X, problem: AllocationProblem) -> np.ndarray:
    """Rank-1 affine correction ``X - ((X a - b) / a.a) a^T`` onto ``X a = b``."""
    a = problem.a
    return X - np.outer((X @ a - problem.b) / (a @ a), a)


def _increment(flow: _Flow, X, k0_rate, graph, dt, integrator):
    if integrator == "euler":
        return dt * k0_rate
    k1 = k0_rate
    k2 = flow.rate(X + 0.5 * dt * k1, graph)[0]
    k3 = flow.rate(X + 0.5 * dt * k2, graph)[0]
    k4 = flow.rate(X + dt * k3, graph)[0]
    return (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _clamp(inc, cap):
    if cap is None:
        return inc, False
    peak = np.abs(inc).max()
    if peak > cap:
        return inc * (cap / peak), True
    return inc, False


def step(X, t: float, config: SimConfig, problem: AllocationProblem, rate_cap: Optional[float] = None):
    """One fixed step from ``t`` to ``t + dt`` using the graph active at ``t``.

    ``rate_cap`` bounds ``max |x(t+dt) - x(t)| / dt``; the increment is
    scaled uniformly when the cap binds.
    """
    X = problem.check_state(X)
    flow = _Flow(problem, config.g)
    graph = config.schedule.graph_at(t)
    k1, _ = flow.rate(X, graph)
    inc = _increment(flow, X, k1, graph, config.dt, config.integrator)
    inc, _ = _clamp(inc, None if rate_cap is None else rate_cap * config.dt)
    X_new = X + inc
    if config.feasibility_correction:
        X_new = project_feasible(X_new, problem)
    if not np.all(np.isfinite(X_new)):
        raise IntegrationError("state became non-finite", t + config.dt)
    return X_new


def feasibility_residual(X, problem: AllocationProblem) -> float:
    """``||X a - b||_2``."""
    X = problem.check_state(X)
    return float(np.linalg.norm(X @ problem.a - problem.b))


def _consensus_from_scaled(S) -> float:
    return float((S.max(axis=1) - S.min(axis=1)).max())


def gradient_consensus_residual(X, problem: AllocationProblem) -> float:
    """``max_{i,j} ||grad f_i/a_i - grad f_j/a_j||_inf``; zero exactly at the optimum."""
    X = problem.check_state(X)
    return _consensus_from_scaled(problem.scaled_gradients(X))


def lyapunov_residual(X, t: float, problem: AllocationProblem, fstar: float) -> float:
    """``sum_i static_i(x_i) - fstar``; the time-varying parts cancel, so ``t`` is unused."""
    return problem.static_total(X) - fstar


def sum_identity_gap(psi, W, g: Callable, relative: bool = False) -> float:
    """Gap in the pairwise summation identity for symmetric ``W`` and odd ``g``.

    With ``D_ij = psi_j - psi_i``,

        sum_i psi_i . sum_j W_ij g(D_ij) == -1/2 sum_{i,j} W_ij D_ij . g(D_ij)

    ``psi`` is an ``n x d`` array (one row per agent).  With ``relative=True``
    the gap is divided by the sum of absolute term magnitudes.
    """
    psi = np.asarray(psi, dtype=float)
    if psi.ndim == 1:
        psi = psi[:, None]
    weights = W.weights if isinstance(W, WeightedGraph) else np.asarray(W, dtype=float)
    D = psi[None, :, :] - psi[:, None, :]
    gD = np.asarray(g(D), dtype=float)
    lhs_terms = weights[:, :, None] * psi[:, None, :] * gD
    rhs_terms = -0.5 * weights[:, :, None] * D * gD
    gap = abs(float(np.sum(lhs_terms)) - float(np.sum(rhs_terms)))
    if relative:
        scale = float(np.sum(np.abs(lhs_terms)) + np.sum(np.abs(rhs_terms)))
        return gap / scale if scale > 0 else gap
    return gap


@dataclass
class Trajectory:
    """Sampled states and per-sample diagnostics of a simulation run.

    ``max_rate`` at a sample is the largest applied agent rate
    ``max_i ||x_i(t+dt) - x_i(t)||_inf / dt`` over the steps since the
    previous sample (at ``t = 0``: the initial right-hand side).
    """

    times: np.ndarray
    states: Optional[np.ndarray]
    F: np.ndarray
    F_star: np.ndarray
    lyapunov: np.ndarray
    feas_residual: np.ndarray
    grad_consensus: np.ndarray
    max_rate: np.ndarray
    final_state: np.ndarray
    steps: int
    reason: str
    clamped_steps: int = 0
    solution: Optional[KktSolution] = field(default=None, repr=False)

    def column(self, name: str) -> np.ndarray:
        return self.times if name == "t" else getattr(self, name)

    def to_csv(self, path, include_states: bool = False) -> None:
        header = list(CSV_COLUMNS)
        d, n = self.final_state.shape
        if include_states:
            if self.states is None:
                raise PreconditionError("trajectory was recorded without states")
            header += [f"x_{p}_{i}" for p in range(d) for i in range(n)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k in range(self.times.size):
                row = [repr(float(self.column(c)[k])) for c in CSV_COLUMNS]
                if include_states:
                    row += [repr(float(v)) for v in self.states[k].ravel()]
                w.writerow(row)

    @property
    def final_error(self) -> float:
        """Largest per-coordinate distance of the final state from the oracle optimum."""
        if self.solution is None:
            return float("nan")
        return float(np.max(np.abs(self.final_state - self.solution.X_star)))


def _initial_scale(flow: _Flow, X, schedule: GraphSchedule) -> float:
    return max(float(np.max(np.abs(flow.rate(X, gr)[0]))) for gr in schedule.graphs)


def simulate(
    problem: AllocationProblem,
    X0,
    config: SimConfig,
    solution: Optional[KktSolution] = None,
) -> Trajectory:
    """Integrate the dynamics from a feasible ``X0`` and record diagnostics.

    Stops at the horizon, when the gradient-consensus residual drops to
    ``config.tol``, or when the residual has not changed at all for
    ``config.plateau_steps`` consecutive steps (quantized maps can freeze
    short of exact consensus).  When the costs are separable and no
    ``solution`` is given, the KKT oracle supplies ``F*`` for the
    Lyapunov column.
    """
    X = problem.check_state(X0).copy()
    a, b = problem.a, problem.b
    res0 = float(np.linalg.norm(X @ a - b))
    if res0 > 1e-9 * (1.0 + np.linalg.norm(b)):
        raise PreconditionError(f"initial state is infeasible: ||X0 a - b|| = {res0:.3e}")
    if config.schedule.n != problem.n:
        raise PreconditionError(f"schedule has {config.schedule.n} agents, problem has {problem.n}")
    if solution is None and problem.stack.separable:
        solution = solve_kkt(problem)
    fstar = solution.f_star if solution is not None else float("nan")

    flow = _Flow(problem, config.g)
    stack = problem.stack
    dt, n_steps = config.dt, config.n_steps
    factor = config.clamp_factor()
    cap = None
    if factor is not None:
        s0 = _initial_scale(flow, X, config.schedule)
        cap = factor * dt * s0 if s0 > 0 else None

    rec = {c: [] for c in CSV_COLUMNS}
    states = [] if config.store_states else None

    def record(k, X, S, rate):
        t = k * dt
        static = float(np.sum(stack.static(X)))
        timed = float(np.sum(stack.time(t)))
        rec["t"].append(t)
        rec["F"].append(static + timed)
        rec["F_star"].append(fstar + timed)
        rec["lyapunov"].append(static - fstar)
        rec["feas_residual"].append(float(np.linalg.norm(X @ a - b)))
        rec["grad_consensus"].append(_consensus_from_scaled(S))
        rec["max_rate"].append(rate)
        if states is not None:
            states.append(X.copy())

    k = 0
    graph = config.graph_for_step(0)
    Xdot, S = flow.rate(X, graph)
    record(0, X, S, float(np.max(np.abs(Xdot))))
    recorded_at = 0
    run_max = 0.0
    clamped = 0
    reason = "horizon"
    last_res, same_count = None, 0
    while k < n_steps:
        res = _consensus_from_scaled(S)
        if res <= config.tol:
            reason = "converged"
            break
        if config.plateau_steps:
            same_count = same_count + 1 if res == last_res else 0
            last_res = res
            if same_count >= config.plateau_steps:
                reason = "plateau"
                break
        inc = _increment(flow, X, Xdot, graph, dt, config.integrator)
        inc, hit = _clamp(inc, cap)
        clamped += hit
        X = X + inc
        if config.feasibility_correction:
            X = project_feasible(X, problem)
        k += 1
        if not np.all(np.isfinite(X)):
            raise IntegrationError("state became non-finite", k * dt)
        run_max = max(run_max, float(np.abs(inc).max()) / dt)
        graph = config.graph_for_step(k)
        Xdot, S = flow.rate(X, graph)
        if k % config.record_every == 0:
            record(k, X, S, run_max)
            recorded_at, run_max = k, 0.0
    if recorded_at != k:
        record(k, X, S, run_max)

    cols = {c: np.array(v) for c, v in rec.items()}
    return Trajectory(
        times=cols["t"],
        states=np.array(states) if states is not None else None,
        F=cols["F"],
        F_star=cols["F_star"],
        lyapunov=cols["lyapunov"],
        feas_residual=cols["feas_residual"],
        grad_consensus=cols["grad_consensus"],
        max_rate=cols["max_rate"],
        final_state=X,
        steps=k,
        reason=reason,
        clamped_steps=int(clamped),
        solution=solution,
    )
