"""Run a configured experiment, write its artifacts and evaluate declared checks.

Checks only read the recorded trajectory diagnostics (and static facts about
the built problem such as ``b`` or the graph weights), never re-simulate.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..dynamics import Trajectory, simulate
from ..netgraph import algebraic_connectivity
from ..oracle import solve_kkt
from ..errors import ConfigError
from .build import Setup, build
from .config import ExperimentConfig

# relative slack when comparing recorded rates with a bound
_RATE_RTOL = 1e-9


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{status} {self.name}: value={self.value:.6g} limit={self.limit:.6g}{extra}"


@dataclass
class RunReport:
    name: str
    scenario: str
    actuation: str
    steps: int
    sim_time: float
    wall_time: float
    reason: str
    feasibility: float
    grad_consensus: float
    lyapunov: float
    lyapunov0: float
    final_error: float
    max_rate: float
    rate_limit: float
    rate_violations: int
    clamped_steps: int
    checks: list = field(default_factory=list)
    paths: dict = field(default_factory=dict)
    trajectory: Optional[Trajectory] = field(default=None, repr=False)
    setup: Optional[Setup] = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def key_values(self) -> dict:
        kv = {
            "name": self.name,
            "scenario": self.scenario,
            "actuation": self.actuation,
            "steps": self.steps,
            "sim_time": repr(self.sim_time),
            "wall_time": f"{self.wall_time:.3f}",
            "reason": self.reason,
            "feasibility": repr(self.feasibility),
            "grad_consensus": repr(self.grad_consensus),
            "lyapunov": repr(self.lyapunov),
            "lyapunov0": repr(self.lyapunov0),
            "final_error": repr(self.final_error),
            "max_rate": repr(self.max_rate),
            "rate_limit": repr(self.rate_limit),
            "rate_violations": self.rate_violations,
            "clamped_steps": self.clamped_steps,
        }
        for c in self.checks:
            kv[f"check.{c.name}"] = "pass" if c.passed else "fail"
        kv["passed"] = "true" if self.passed else "false"
        return kv

    def to_text(self) -> str:
        lines = [
            f"run {self.name} (scenario {self.scenario}, g = {self.actuation})",
            f"  stopped: {self.reason} after {self.steps} steps, t = {self.sim_time:g}, wall {self.wall_time:.2f} s",
            f"  max feasibility residual  {self.feasibility:.3e}",
            f"  final gradient consensus  {self.grad_consensus:.3e}",
            f"  Lyapunov residual         {self.lyapunov:.3e} (initial {self.lyapunov0:.3e})",
            f"  final error vs oracle     {self.final_error:.3e}",
            f"  max recorded rate         {self.max_rate:.6g}",
        ]
        if math.isfinite(self.rate_limit):
            lines.append(f"  rate limit {self.rate_limit:g}: {self.rate_violations} violating samples")
        if self.checks:
            lines.append("checks:")
            lines += ["  " + c.line() for c in self.checks]
        lines.append("")
        lines.append("[report]")
        lines += [f"{k}={v}" for k, v in self.key_values().items()]
        return "\n".join(lines) + "\n"


def rate_bound(setup: Setup) -> float:
    """``max_i sum_j W_ij * sup|g| / min|a_i|`` over all scheduled graphs."""
    top = max(float(gr.degrees().max()) for gr in setup.schedule.graphs)
    return top * setup.g.bound() / float(np.min(np.abs(setup.problem.a)))


def _first_time(tr: Trajectory, mask) -> float:
    idx = np.flatnonzero(mask)
    return float(tr.times[idx[0]]) if idx.size else float("inf")


def evaluate_checks(cfg: ExperimentConfig, report: RunReport) -> list:
    tr, setup = report.trajectory, report.setup
    problem = setup.problem
    results = []
    F0 = float(tr.lyapunov[0])
    for name, raw in cfg.section("checks").items():
        switch = raw.strip().lower() in ("on", "true", "yes")
        arg = None if switch or name == "box" else cfg.get("checks", name, kind=float)
        if name == "feasibility":
            tol = 1e-9 if arg is None else arg
            v = float(tr.feas_residual.max()) / (1.0 + float(np.linalg.norm(problem.b)))
            results.append(CheckResult(name, v <= tol, v, tol, "max ||Xa-b|| / (1+||b||)"))
        elif name == "sum_abs":
            tol = 1e-6 if arg is None else arg
            v = float(tr.feas_residual.max())
            results.append(CheckResult(name, v <= tol, v, tol, "max ||Xa-b||"))
        elif name == "final_error":
            tol = 1e-3 if arg is None else arg
            v = tr.final_error
            results.append(CheckResult(name, bool(v <= tol), v, tol, "max |X - X*|"))
        elif name == "lyapunov_ratio":
            r = 1e-6 if arg is None else arg
            v = float(tr.lyapunov[-1])
            results.append(CheckResult(name, v <= r * F0, v, r * F0, "final F-bar vs ratio * F-bar(0)"))
        elif name == "reach_ratio":
            r = 1e-3 if arg is None else arg
            t_hit = _first_time(tr, tr.lyapunov <= r * F0)
            results.append(CheckResult(name, math.isfinite(t_hit), t_hit, r, "first time F-bar <= ratio * F-bar(0)"))
        elif name == "grad_consensus":
            tol = 1e-6 if arg is None else arg
            v = float(tr.grad_consensus[-1])
            results.append(CheckResult(name, v <= tol, v, tol, "final residual"))
        elif name == "quantized_floor":
            floor = max(setup.sim.tol, (problem.n - 1) * setup.g.dead_zone())
            v = float(tr.grad_consensus[-1])
            results.append(CheckResult(name, v <= floor, v, floor, "final residual vs quantizer floor"))
        elif name == "monotone":
            slack = (1e-6 if arg is None else arg) * F0
            v = float(np.max(np.diff(tr.lyapunov))) if tr.lyapunov.size > 1 else 0.0
            results.append(CheckResult(name, v <= slack, v, slack, "largest F-bar increase between samples"))
        elif name == "max_rate":
            lim = 1.0 if arg is None else arg
            v = report.max_rate
            results.append(CheckResult(name, v <= lim * (1 + _RATE_RTOL), v, lim, "max recorded rate"))
        elif name == "rate_bound":
            lim = rate_bound(setup)
            v = report.max_rate
            ok = math.isfinite(lim) and v <= lim * (1 + _RATE_RTOL)
            detail = "analytic bound" if math.isfinite(lim) else "actuation is unbounded"
            results.append(CheckResult(name, ok, v, lim, detail))
        elif name == "box":
            if switch:
                if setup.box is None:
                    raise ConfigError("[checks] box = on needs [problem] box")
                lo, hi = setup.box
            else:
                lo, hi = cfg.get("checks", name, kind=list)
            slack = 1.0 / setup.penalty_eps if setup.penalty_eps else 0.0
            X = tr.final_state
            v = float(max(np.max(lo - X), np.max(X - hi)))
            results.append(CheckResult(name, v <= slack, v, slack, f"excursion beyond [{lo:g}, {hi:g}]"))
        elif name == "exp_decay":
            slack = 1e-3 if arg is None else arg
            lam = min(algebraic_connectivity(gr) for gr in setup.schedule.graphs)
            envelope = F0 * np.exp(-2.0 * lam * tr.times) * (1.0 + slack)
            excess = tr.lyapunov - envelope
            v = float(np.max(excess / np.maximum(envelope, np.finfo(float).tiny)))
            results.append(CheckResult(name, bool(np.all(excess <= 0)), v, 0.0, f"lambda2={lam:.6g}"))
    return results


def run(cfg: ExperimentConfig, out_dir=None, quiet: bool = True) -> RunReport:
    """Build, simulate, write ``<name>_trajectory.csv``, ``<name>_oracle.csv``, ``<name>_report.txt``."""
    setup = build(cfg)
    problem = setup.problem
    start = time.perf_counter()
    solution = solve_kkt(problem) if problem.stack.separable else None
    tr = simulate(problem, setup.X0, setup.sim, solution)
    wall = time.perf_counter() - start

    max_rate = float(tr.max_rate.max())
    declared = cfg.section("checks")
    if "max_rate" in declared:
        raw = declared["max_rate"].strip().lower()
        limit = 1.0 if raw in ("on", "true", "yes") else cfg.get("checks", "max_rate", kind=float)
    elif "rate_bound" in declared:
        limit = rate_bound(setup)
    else:
        limit = math.inf
    violations = int(np.sum(tr.max_rate > limit * (1 + _RATE_RTOL)))

    report = RunReport(
        name=cfg.name,
        scenario=cfg.scenario,
        actuation=str(setup.g),
        steps=tr.steps,
        sim_time=float(tr.times[-1]),
        wall_time=wall,
        reason=tr.reason,
        feasibility=float(tr.feas_residual.max()),
        grad_consensus=float(tr.grad_consensus[-1]),
        lyapunov=float(tr.lyapunov[-1]),
        lyapunov0=float(tr.lyapunov[0]),
        final_error=tr.final_error,
        max_rate=max_rate,
        rate_limit=limit,
        rate_violations=violations,
        clamped_steps=tr.clamped_steps,
        trajectory=tr,
        setup=setup,
    )
    report.checks = evaluate_checks(cfg, report)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "trajectory": out / f"{cfg.name}_trajectory.csv",
            "report": out / f"{cfg.name}_report.txt",
        }
        tr.to_csv(paths["trajectory"], include_states=setup.include_states)
        if solution is not None:
            paths["oracle"] = out / f"{cfg.name}_oracle.csv"
            solution.to_csv(paths["oracle"])
        paths["report"].write_text(report.to_text())
        report.paths = {k: str(v) for k, v in paths.items()}
    if not quiet:
        sys.stdout.write(report.to_text())
    return report


def check(cfg: ExperimentConfig, report: RunReport, stream=None) -> int:
    """0 if every declared check passes, 1 otherwise (failing checks are named on ``stream``)."""
    if not report.checks and cfg.section("checks"):
        report.checks = evaluate_checks(cfg, report)
    failing = [c for c in report.checks if not c.passed]
    stream = sys.stderr if stream is None else stream
    for c in failing:
        stream.write(f"{report.name}: check failed: {c.line()}\n")
    return 1 if failing else 0
