"""Experiment config files.

A config is a flat, sectioned ``key = value`` file::

    [problem]
    scenario = agc
    costs = agc
    n = 10
    b = 800
    box = -50, 150

    [actuation]
    kind = fixed_time
    mu1 = 0.7
    mu2 = 1.4

    [schedule]
    kind = cycle
    ...

    [sim]
    dt = 0.01
    horizon = 300

    [checks]
    sum_abs = 1e-6

Comments start with ``#`` or ``;``.  Built-in scenarios live next to this
package and can be referenced by name instead of path.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..errors import ConfigError

SECTIONS = ("problem", "actuation", "schedule", "sim", "checks")

_KNOWN = {
    "problem": {
        "scenario", "costs", "n", "d", "a", "b", "gamma", "beta", "alpha", "box",
        "penalty_eps", "penalty_mu", "seed", "init", "init_spread",
    },
    "actuation": None,  # parameters depend on the kind; validated by the actuation module
    "schedule": {
        "kind", "count", "p", "weights", "dwell", "window", "seed", "max_degree", "files", "weight",
    },
    "sim": {
        "dt", "horizon", "integrator", "record_every", "tol", "plateau_steps",
        "feasibility_correction", "rate_clamp", "states",
    },
    "checks": {
        "feasibility", "sum_abs", "final_error", "lyapunov_ratio", "grad_consensus",
        "monotone", "max_rate", "rate_bound", "box", "quantized_floor", "exp_decay",
        "reach_ratio",
    },
}


@dataclass
class ExperimentConfig:
    name: str
    sections: dict = field(default_factory=dict)
    source: str | None = None

    @property
    def scenario(self) -> str:
        return self.sections["problem"].get("scenario", "custom")

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})

    def get(self, section: str, key: str, default=None, kind=str):
        raw = self.section(section).get(key)
        if raw is None:
            return default
        try:
            return convert(raw, kind)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None

    def require(self, section: str, key: str, kind=str):
        value = self.get(section, key, kind=kind)
        if value is None:
            raise ConfigError(f"[{section}] missing required key {key!r}")
        return value

    def with_seed(self, seed: int) -> "ExperimentConfig":
        sections = {k: dict(v) for k, v in self.sections.items()}
        sections.setdefault("problem", {})["seed"] = str(seed)
        if "schedule" in sections:
            sections["schedule"]["seed"] = str(seed)
        return ExperimentConfig(self.name, sections, self.source)


def floats(raw: str) -> list[float]:
    return [float(tok) for tok in raw.replace(",", " ").split()]


def boolean(raw: str) -> bool:
    val = raw.strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def convert(raw: str, kind):
    if kind is str:
        return raw.strip()
    if kind is bool:
        return boolean(raw)
    if kind is list:
        return floats(raw)
    return kind(raw)


def builtin_dir():
    return resources.files("nlalloc") / "scenarios"


def list_builtin() -> list[str]:
    return sorted(p.name[:-4] for p in builtin_dir().iterdir() if p.name.endswith(".ini"))


def parse_config(text: str, name: str = "custom", source: str | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#", ";"), interpolation=None, default_section="__unused__"
    )
    try:
        parser.read_string(text, source=source or name)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    sections = {}
    for sec in parser.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]; expected one of {', '.join(SECTIONS)}")
        values = dict(parser.items(sec))
        allowed = _KNOWN[sec]
        if allowed is not None:
            unknown = sorted(set(values) - allowed)
            if unknown:
                raise ConfigError(f"[{sec}] unknown key(s): {', '.join(unknown)}")
        sections[sec] = values
    if "problem" not in sections:
        raise ConfigError("config needs a [problem] section")
    return ExperimentConfig(name, sections, source)


def load_config(ref) -> ExperimentConfig:
    """Load a config from a path, or a built-in scenario by name."""
    path = Path(ref)
    if path.is_file():
        return parse_config(path.read_text(), name=path.stem, source=str(path))
    builtin = builtin_dir() / f"{ref}.ini"
    if builtin.is_file():
        return parse_config(builtin.read_text(), name=str(ref), source=f"<builtin:{ref}>")
    raise ConfigError(f"no config file or built-in scenario named {str(ref)!r}")
