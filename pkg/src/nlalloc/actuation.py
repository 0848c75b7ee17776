"""Odd, sign-preserving actuation maps ``g``.

Every map acts on arrays whose *last* axis is the state dimension ``d``, so
``g`` can be applied to a single ``d``-vector or to a stack of link
disagreements at once.  Scalars are treated as 1-vectors.  ``power_sign`` and
``fixed_time`` use the Euclidean norm of the whole vector; every other map is
elementwise.

Use :func:`make_actuation` (or :meth:`Actuation.from_spec`) to build a
parameterized, validated :class:`Actuation` object.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ParameterError

__all__ = [
    "Actuation",
    "SignReport",
    "make_actuation",
    "compose",
    "identity",
    "power_sign",
    "fixed_time",
    "uniform_quantizer",
    "log_quantizer",
    "robust_uniform",
    "robust_laplace",
    "saturation",
    "verify_sign_preserving",
    "KINDS",
]


def _arr(z):
    return np.asarray(z, dtype=float)


def identity(z):
    return _arr(z).copy()


def power_sign(z, mu):
    """``z * ||z||^(mu - 1)``; zero at ``z = 0`` for every ``mu >= 0``."""
    z = _arr(z)
    if z.ndim == 0 or z.shape[-1] == 1:
        norm = np.abs(z)
    else:
        norm = np.sqrt(np.sum(z * z, axis=-1, keepdims=True))
    nonzero = norm > 0
    scale = np.where(nonzero, norm, 1.0) ** (mu - 1.0)
    return np.where(nonzero, z * scale, 0.0)


def fixed_time(z, mu1, mu2):
    return power_sign(z, mu1) + power_sign(z, mu2)


def uniform_quantizer(z, delta):
    # np.round is round-half-to-even
    return delta * np.round(_arr(z) / delta)


def log_quantizer(z, delta):
    """``sign(z) * exp(delta * round(log|z| / delta))`` elementwise, 0 at 0."""
    z = _arr(z)
    mag = np.abs(z)
    with np.errstate(divide="ignore"):
        level = np.exp(delta * np.round(np.log(mag) / delta))
    return np.where(mag > 0, np.sign(z) * level, 0.0)


def robust_uniform(z, eps, threshold):
    z = _arr(z)
    gain = (1.0 - eps) / (eps * threshold)
    return np.where(np.abs(z) > threshold, gain * np.sign(z), 0.0)


def robust_laplace(z, eps):
    return 2.0 * eps * np.sign(_arr(z))


def saturation(z, kappa):
    return np.clip(_arr(z), -kappa, kappa)


def _check_range(name, value, lo=None, hi=None, lo_open=True, hi_open=True):
    value = float(value)
    bad = not np.isfinite(value)
    if lo is not None:
        bad |= value <= lo if lo_open else value < lo
    if hi is not None:
        bad |= value >= hi if hi_open else value > hi
    if bad:
        raise ParameterError(f"{name}={value} out of range")
    return value


def _v_power_sign(mu):
    return {"mu": _check_range("mu", mu, 0.0, lo_open=False)}


def _v_fixed_time(mu1, mu2):
    return {"mu1": _check_range("mu1", mu1, 0.0, 1.0), "mu2": _check_range("mu2", mu2, 0.0)}


def _v_delta(delta):
    return {"delta": _check_range("delta", delta, 0.0)}


def _v_robust_uniform(eps, threshold):
    return {"eps": _check_range("eps", eps, 0.0, 1.0), "threshold": _check_range("threshold", threshold, 0.0)}


def _v_robust_laplace(eps):
    return {"eps": _check_range("eps", eps, 0.0, 1.0)}


def _v_saturation(kappa):
    return {"kappa": _check_range("kappa", kappa, 0.0)}


# kind -> (function, validator, strictly sign-preserving)
KINDS: dict[str, tuple[Callable, Callable, bool]] = {
    "identity": (identity, lambda: {}, True),
    "power_sign": (power_sign, _v_power_sign, True),
    "fixed_time": (fixed_time, _v_fixed_time, True),
    "uniform_quantizer": (uniform_quantizer, _v_delta, False),
    "log_quantizer": (log_quantizer, _v_delta, True),
    "robust_uniform": (robust_uniform, _v_robust_uniform, False),
    "robust_laplace": (robust_laplace, _v_robust_laplace, True),
    "saturation": (saturation, _v_saturation, True),
}

# short aliases accepted in config files
_ALIASES = {"linear": "identity", "sgn_mu": "power_sign", "d": "threshold", "d_th": "threshold"}


@dataclass(frozen=True)
class Actuation:
    """A named actuation map with validated parameters.

    ``strict`` is False for maps with a dead zone around the origin
    (``uniform_quantizer``, ``robust_uniform``), which send some nonzero
    inputs to zero.
    """

    kind: str
    params: tuple = ()
    parts: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind == "composition":
            if len(self.parts) != 2:
                raise ParameterError("composition needs exactly (outer, inner)")
            return
        if self.kind not in KINDS:
            raise ParameterError(f"unknown actuation kind {self.kind!r}; choose from {sorted(KINDS)}")
        _, validate, _ = KINDS[self.kind]
        try:
            checked = validate(**dict(self.params))
        except TypeError as exc:
            raise ParameterError(f"bad parameters for {self.kind}: {exc}") from None
        object.__setattr__(self, "params", tuple(sorted(checked.items())))

    def __call__(self, z):
        if self.kind == "composition":
            outer, inner = self.parts
            return outer(inner(z))
        fn = KINDS[self.kind][0]
        return fn(z, **dict(self.params))

    @property
    def strict(self) -> bool:
        if self.kind == "composition":
            return all(p.strict for p in self.parts)
        return KINDS[self.kind][2]

    @property
    def sublinear(self) -> bool:
        """True if some component grows like ``|z|^mu`` with ``mu < 1`` near 0."""
        if self.kind == "composition":
            return any(p.sublinear for p in self.parts)
        p = dict(self.params)
        if self.kind == "power_sign":
            return p["mu"] < 1
        return self.kind == "fixed_time"

    def bound(self) -> float:
        """Sup-norm bound on the output per coordinate (``inf`` if unbounded)."""
        p = dict(self.params)
        if self.kind == "composition":
            return self.parts[0].bound()
        if self.kind == "saturation":
            return p["kappa"]
        if self.kind == "robust_laplace":
            return 2.0 * p["eps"]
        if self.kind == "robust_uniform":
            return (1.0 - p["eps"]) / (p["eps"] * p["threshold"])
        return np.inf

    def dead_zone(self) -> float:
        """Largest per-coordinate input magnitude that can be mapped to zero."""
        p = dict(self.params)
        if self.kind == "composition":
            return max(part.dead_zone() for part in self.parts)
        if self.kind == "uniform_quantizer":
            return 0.5 * p["delta"]
        if self.kind == "robust_uniform":
            return p["threshold"]
        return 0.0

    def spec(self) -> str:
        """Text form understood by :meth:`from_spec`."""
        if self.kind == "composition":
            raise ParameterError("compositions have no single-line spec form")
        return " ".join([f"kind={self.kind}"] + [f"{k}={v!r}" for k, v in self.params])

    @classmethod
    def from_spec(cls, text: str) -> "Actuation":
        """Parse ``"kind=saturation kappa=1.0"``-style text."""
        try:
            tokens = dict(tok.split("=", 1) for tok in text.split())
            kind = tokens.pop("kind")
            params = {k: float(v) for k, v in tokens.items()}
        except (KeyError, ValueError):
            raise ParameterError(f"bad actuation spec {text!r}; expected 'kind=<name> key=value ...'") from None
        return make_actuation(kind, **params)

    def __str__(self):
        if self.kind == "composition":
            return f"{self.parts[0]}∘{self.parts[1]}"
        args = ", ".join(f"{k}={v:g}" for k, v in self.params)
        return f"{self.kind}({args})"


def make_actuation(kind: str, **params) -> Actuation:
    kind = _ALIASES.get(kind, kind)
    params = {_ALIASES.get(k, k): v for k, v in params.items()}
    return Actuation(kind, tuple(params.items()))


def compose(outer: Actuation, inner: Actuation) -> Actuation:
    """``z -> outer(inner(z))``; odd and sign-preserving if both parts are."""
    return Actuation("composition", (), (outer, inner))


@dataclass(frozen=True)
class SignReport:
    odd_ok: bool
    sign_ok: bool
    zero_ok: bool
    strict: bool

    @property
    def ok(self) -> bool:
        return self.odd_ok and self.sign_ok and self.zero_ok


def verify_sign_preserving(g: Callable, n_samples: int = 1000, seed=None, dim: int = 3) -> SignReport:
    """Sample random vectors and check oddness, sign preservation and ``g(0) = 0``.

    Magnitudes are drawn log-uniformly over ``[1e-4, 1e4]`` so dead zones and
    saturation regions both get exercised.  ``strict`` is False as soon as a
    nonzero coordinate is mapped to zero.
    """
    if n_samples < 1:
        raise ParameterError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    mags = 10.0 ** rng.uniform(-4, 4, size=(n_samples, dim))
    z = rng.choice([-1.0, 1.0], size=(n_samples, dim)) * mags
    gz = np.asarray(g(z), dtype=float)
    gneg = np.asarray(g(-z), dtype=float)
    odd_ok = bool(np.array_equal(gneg, -gz))
    sign_ok = bool(np.all(np.sign(gz) * np.sign(z) >= 0) and np.all(np.sum(z * gz, axis=-1) >= 0))
    g0 = np.asarray(g(np.zeros(dim)), dtype=float)
    zero_ok = bool(np.all(g0 == 0))
    strict = bool(np.all(gz != 0))
    return SignReport(odd_ok, sign_ok, zero_ok, strict)
