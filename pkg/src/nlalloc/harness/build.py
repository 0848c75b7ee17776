"""Turn an :class:`ExperimentConfig` into problem, schedule, actuation and sim objects."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..actuation import Actuation, compose, make_actuation
from ..costs import QuadraticCost, make_agc_costs, make_f2_cost, penalize
from ..dynamics import SimConfig, project_feasible
from ..errors import AllocError, ConfigError, DegenerateCouplingError
from ..netgraph import (
    GraphSchedule,
    build_complete,
    build_cycle,
    build_switching_erdos_renyi,
    read_triples,
)
from ..problem import AllocationProblem
from .config import ExperimentConfig

COST_KINDS = ("f2", "agc", "quadratic")
SCHEDULE_KINDS = ("erdos_renyi", "cycle", "complete", "triples")
INIT_MODES = ("equal_share", "random_feasible")


@dataclass(frozen=True, eq=False)
class Setup:
    """Everything a run needs, built from one config."""

    problem: AllocationProblem
    schedule: GraphSchedule
    g: Actuation
    sim: SimConfig
    X0: np.ndarray
    window: float
    box: Optional[tuple]
    penalty_eps: Optional[float]
    include_states: bool


def init_feasible(problem: AllocationProblem, mode: str = "equal_share", seed=None, spread: float = 1.0) -> np.ndarray:
    """A feasible starting state ``X0`` with ``X0 @ a == b``.

    ``equal_share`` gives every agent ``b / sum(a)``.  ``random_feasible``
    perturbs that point with Gaussian noise of scale ``spread`` (relative to
    its magnitude) and projects back onto the constraint.
    """
    a, b = problem.a, problem.b
    if mode not in INIT_MODES:
        raise ConfigError(f"init mode must be one of {INIT_MODES}, got {mode!r}")
    total = float(np.sum(a))
    if abs(total) <= 1e-12 * float(np.sum(np.abs(a))):
        raise DegenerateCouplingError("sum(a) == 0: no equal-share allocation meets X a = b")
    share = b / total
    X = np.repeat(share[:, None], problem.n, axis=1)
    if mode == "random_feasible":
        rng = np.random.default_rng(seed)
        scale = spread * (1.0 + np.abs(share))[:, None]
        X = project_feasible(X + scale * rng.standard_normal(X.shape), problem)
    return X


def _wrap(section: str, fn, *args, **kwargs):
    # library parameter errors surface as config errors naming the section
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (AllocError, TypeError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def _per_agent(values: list, n: int, key: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size == 1:
        return np.full(n, float(arr[0]))
    if arr.size != n:
        raise ConfigError(f"[problem] {key} needs 1 or {n} values, got {arr.size}")
    return arr


def build_problem(cfg: ExperimentConfig):
    n = cfg.require("problem", "n", int)
    d = cfg.get("problem", "d", 1, int)
    seed = cfg.get("problem", "seed", 0, int)
    kind = cfg.get("problem", "costs", "quadratic")
    if kind == "f2":
        costs = _wrap("problem", make_f2_cost, n, seed=seed, d=d)
    elif kind == "agc":
        if d != 1:
            raise ConfigError("[problem] agc costs are scalar; d must be 1")
        costs = _wrap("problem", make_agc_costs, n, seed=seed)
    elif kind == "quadratic":
        if d != 1:
            raise ConfigError("[problem] quadratic costs from config are scalar; d must be 1")
        gamma = _per_agent(cfg.require("problem", "gamma", list), n, "gamma")
        beta = _per_agent(cfg.get("problem", "beta", [0.0], list), n, "beta")
        alpha = _per_agent(cfg.get("problem", "alpha", [0.0], list), n, "alpha")
        costs = [_wrap("problem", QuadraticCost, gamma[i], beta[i], alpha[i]) for i in range(n)]
    else:
        raise ConfigError(f"[problem] costs must be one of {COST_KINDS}, got {kind!r}")

    box = cfg.get("problem", "box", None, list)
    eps = None
    if box is not None:
        if len(box) != 2:
            raise ConfigError("[problem] box needs two values: lower, upper")
        eps = cfg.get("problem", "penalty_eps", 10.0, float)
        mu = cfg.get("problem", "penalty_mu", 20.0, float)
        costs = [_wrap("problem", penalize, c, box[0], box[1], eps, mu) for c in costs]

    a_raw = cfg.get("problem", "a", "1")
    if a_raw.startswith("uniform"):
        lo, hi = _wrap("problem", _parse_pair, a_raw[len("uniform"):], "a")
        a = np.random.default_rng(seed + 1).uniform(lo, hi, size=n)
    else:
        a = _per_agent(cfg.get("problem", "a", [1.0], list), n, "a")
    b = np.asarray(cfg.require("problem", "b", list))
    if b.size == 1:
        b = np.full(d, b[0])
    problem = _wrap("problem", AllocationProblem, tuple(costs), a, b)
    return problem, (tuple(box) if box is not None else None), eps


def _parse_pair(text: str, key: str):
    vals = [float(v) for v in text.strip().strip("()").replace(",", " ").split()]
    if len(vals) != 2:
        raise ConfigError(f"[problem] {key} = uniform(lo, hi) needs two numbers")
    return vals


def build_schedule(cfg: ExperimentConfig, n: int):
    kind = cfg.get("schedule", "kind", "complete")
    dwell = cfg.get("schedule", "dwell", 1.0, float)
    seed = cfg.get("schedule", "seed", cfg.get("problem", "seed", 0, int), int)
    weights = cfg.get("schedule", "weights", [0.5, 1.0], list)
    if len(weights) != 2:
        raise ConfigError("[schedule] weights needs two values: lo, hi")
    if kind == "erdos_renyi":
        p = cfg.require("schedule", "p", float)
        count = cfg.get("schedule", "count", 4, int)
        graphs = _wrap("schedule", build_switching_erdos_renyi, n, p, count, weights, seed)
    elif kind == "cycle":
        graphs = [_wrap("schedule", build_cycle, n, weights, seed)]
    elif kind == "complete":
        graphs = [_wrap("schedule", build_complete, n, cfg.get("schedule", "weight", 1.0, float))]
    elif kind == "triples":
        files = cfg.require("schedule", "files").replace(",", " ").split()
        base = None
        if cfg.source and not cfg.source.startswith("<"):
            base = Path(cfg.source).parent
        graphs = []
        for f in files:
            path = base / f if base is not None else f
            try:
                graphs.append(read_triples(path, n))
            except OSError as exc:
                raise ConfigError(f"[schedule] cannot read {path}: {exc}") from None
            except AllocError as exc:
                raise ConfigError(f"[schedule] {path}: {exc}") from None
    else:
        raise ConfigError(f"[schedule] kind must be one of {SCHEDULE_KINDS}, got {kind!r}")

    target = cfg.get("schedule", "max_degree", None, float)
    if target is not None:
        if not target > 0:
            raise ConfigError("[schedule] max_degree must be positive")
        top = max(float(g.degrees().max()) for g in graphs)
        if top > 0:
            graphs = [g.scaled(target / top) for g in graphs]
    schedule = _wrap("schedule", GraphSchedule, tuple(graphs), dwell)
    window = cfg.get("schedule", "window", schedule.period, float)
    return schedule, window


def build_actuation(cfg: ExperimentConfig) -> Actuation:
    params = dict(cfg.section("actuation"))
    kind = params.pop("kind", "identity").strip()
    if kind == "composition":
        try:
            outer, inner = params.pop("outer"), params.pop("inner")
        except KeyError:
            raise ConfigError("[actuation] composition needs outer = ... and inner = ... specs") from None
        if params:
            raise ConfigError(f"[actuation] unknown key(s) for composition: {', '.join(sorted(params))}")
        return compose(_wrap("actuation", Actuation.from_spec, outer), _wrap("actuation", Actuation.from_spec, inner))
    try:
        values = {k: float(v) for k, v in params.items()}
    except ValueError as exc:
        raise ConfigError(f"[actuation] {exc}") from None
    return _wrap("actuation", make_actuation, kind, **values)


def build_sim(cfg: ExperimentConfig, schedule: GraphSchedule, g: Actuation) -> SimConfig:
    plateau = cfg.get("sim", "plateau_steps", 1000, int)
    clamp_raw = cfg.get("sim", "rate_clamp", "auto")
    if clamp_raw in ("auto",):
        clamp = "auto"
    elif clamp_raw in ("none", "off"):
        clamp = None
    else:
        clamp = _wrap("sim", float, clamp_raw)
    return _wrap(
        "sim",
        SimConfig,
        dt=cfg.require("sim", "dt", float),
        horizon=cfg.require("sim", "horizon", float),
        schedule=schedule,
        g=g,
        integrator=cfg.get("sim", "integrator", "euler"),
        record_every=cfg.get("sim", "record_every", 1, int),
        feasibility_correction=cfg.get("sim", "feasibility_correction", False, bool),
        tol=cfg.get("sim", "tol", 1e-6, float),
        plateau_steps=plateau if plateau > 0 else None,
        rate_clamp=clamp,
        store_states=cfg.get("sim", "states", False, bool),
    )


def build(cfg: ExperimentConfig) -> Setup:
    problem, box, eps = build_problem(cfg)
    schedule, window = build_schedule(cfg, problem.n)
    g = build_actuation(cfg)
    sim = build_sim(cfg, schedule, g)
    mode = cfg.get("problem", "init", "equal_share")
    X0 = _wrap(
        "problem", init_feasible, problem, mode,
        seed=cfg.get("problem", "seed", 0, int),
        spread=cfg.get("problem", "init_spread", 1.0, float),
    )
    return Setup(problem, schedule, g, sim, X0, window, box, eps, sim.store_states)
