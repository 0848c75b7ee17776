"""Config-driven experiment runner and command line interface."""

from .build import Setup, build, init_feasible
from .config import ExperimentConfig, list_builtin, load_config, parse_config
from .runner import CheckResult, RunReport, check, evaluate_checks, rate_bound, run

__all__ = [
    "ExperimentConfig",
    "RunReport",
    "CheckResult",
    "Setup",
    "build",
    "check",
    "evaluate_checks",
    "init_feasible",
    "list_builtin",
    "load_config",
    "parse_config",
    "rate_bound",
    "run",
]
