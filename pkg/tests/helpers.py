"""Shared builders and numeric oracles for the test suite."""

import functools

import numpy as np

from nlalloc import AllocationProblem, QuadraticCost
from nlalloc.costs import LogSumExpQuadCost, PenalizedCost, make_agc_costs, make_f2_cost
from nlalloc.harness import load_config, run

# (criterion, passed, detail) lines printed at the end of the session
ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def scenario_report(name):
    """Run a built-in scenario once per session."""
    return run(load_config(name))


def quad_problem(gamma, a, b, beta=0.0):
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    beta = np.broadcast_to(np.asarray(beta, dtype=float), gamma.shape)
    costs = [QuadraticCost(g, bb) for g, bb in zip(gamma, beta)]
    return AllocationProblem(tuple(costs), a, b)


def fd_gradient(cost, x, h=1e-5):
    """Central finite difference of the static part."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for p in range(x.size):
        e = np.zeros_like(x)
        e[p] = h
        out[p] = (cost.static(x + e) - cost.static(x - e)) / (2 * h)
    return out


def fd_relative_error(cost, x, h=1e-5):
    g = cost.grad(x)
    return float(np.max(np.abs(g - fd_gradient(cost, x, h)) / np.maximum(1.0, np.abs(g))))


def random_cost(seed):
    """One of the shipped cost families with seeded parameters, plus a well-scaled test point."""
    rng = np.random.default_rng(seed)
    kind = seed % 4
    if kind == 0:
        cost = make_f2_cost(1, seed=seed)[0]
        x = rng.uniform(-3, 3, size=4)
    elif kind == 1:
        cost = make_agc_costs(1, seed=seed)[0]
        x = rng.uniform(-50, 150, size=1)
    elif kind == 2:
        base = make_agc_costs(1, seed=seed)[0]
        cost = PenalizedCost(base, -50.0, 150.0, 10.0, 20.0)
        # include points near and beyond the box edges
        x = rng.uniform(-52, 152, size=1)
    else:
        d = 3
        base = LogSumExpQuadCost(*(rng.uniform(lo, hi, size=d) for lo, hi in
                                   [(0.5, 2), (-1, 1), (-2, 2), (-2, 2), (0, 1), (0.1, 2), (0, 6)]))
        cost = PenalizedCost(base, -1.0, 1.0, 5.0, 10.0)
        x = rng.uniform(-2, 2, size=d)
    return cost, x
