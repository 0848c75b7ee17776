"""Undirected weighted graphs and piecewise-constant switching schedules.

A :class:`WeightedGraph` is a symmetric, nonnegative weight matrix with a
zero diagonal.  A :class:`GraphSchedule` cycles through a list of graphs,
holding each one for a fixed dwell time.  Individual graphs in a schedule may
be disconnected; what matters for convergence is that the union over every
window of length ``window`` is connected (uniform connectivity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, InitVar
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import DimensionError, ParameterError

__all__ = [
    "WeightedGraph",
    "GraphSchedule",
    "build_erdos_renyi",
    "build_cycle",
    "build_complete",
    "build_switching_erdos_renyi",
    "union_graph",
    "is_connected",
    "check_uniform_connectivity",
    "algebraic_connectivity",
    "laplacian",
    "to_triples",
    "from_triples",
    "write_triples",
    "read_triples",
]


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Symmetric nonnegative link weights over ``n`` agents.

    Parameters
    ----------
    weights : array_like, shape (n, n)
        Link weights. ``weights[i, j] > 0`` iff agents i and j are linked.
    check : bool, default True
        Validate symmetry, sign and diagonal. Tests that need a deliberately
        broken (asymmetric) matrix pass ``check=False``.
    """

    weights: np.ndarray
    check: InitVar[bool] = True

    def __post_init__(self, check):
        w = np.array(self.weights, dtype=float, copy=True)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionError(f"weights must be square, got shape {w.shape}")
        if w.shape[0] < 1:
            raise DimensionError("graph needs at least one agent")
        if check:
            if not np.all(np.isfinite(w)):
                raise ParameterError("weights must be finite")
            if np.any(w < 0):
                raise ParameterError("weights must be nonnegative")
            if np.any(np.diag(w) != 0):
                raise ParameterError("weights must have a zero diagonal")
            if not np.array_equal(w, w.T):
                raise ParameterError("weights must be symmetric")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @cached_property
    def edges(self):
        """Ordered pairs ``(i, j, w_ij)`` with positive weight, sorted by ``i``."""
        ii, jj = np.nonzero(self.weights > 0)
        return ii, jj, self.weights[ii, jj]

    @property
    def n_links(self) -> int:
        """Number of undirected links (for a symmetric matrix)."""
        return int(np.count_nonzero(np.triu(self.weights > 0, k=1)))

    def degrees(self) -> np.ndarray:
        """Weighted degree of every agent, ``sum_j W_ij``."""
        return self.weights.sum(axis=1)

    def scaled(self, factor: float) -> "WeightedGraph":
        if not factor > 0:
            raise ParameterError("scale factor must be positive")
        return WeightedGraph(self.weights * factor)

    def __eq__(self, other):
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.weights.tobytes())

    def __repr__(self):
        return f"WeightedGraph(n={self.n}, links={self.n_links})"


@dataclass(frozen=True)
class GraphSchedule:
    """Round-robin switching over ``graphs``, each held for ``dwell`` seconds.

    ``graph_at(t)`` is right-continuous: graph ``k`` is active on
    ``[k*dwell, (k+1)*dwell)`` and the cycle repeats with period
    ``len(graphs) * dwell``.
    """

    graphs: tuple
    dwell: float
    _fdwell: Fraction = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        graphs = tuple(self.graphs)
        if not graphs:
            raise ParameterError("schedule needs at least one graph")
        if not all(isinstance(g, WeightedGraph) for g in graphs):
            raise ParameterError("schedule entries must be WeightedGraph instances")
        if len({g.n for g in graphs}) != 1:
            raise DimensionError("all graphs in a schedule must share the same n")
        if not (self.dwell > 0 and math.isfinite(self.dwell)):
            raise ParameterError(f"dwell must be positive, got {self.dwell}")
        object.__setattr__(self, "graphs", graphs)
        object.__setattr__(self, "dwell", float(self.dwell))
        object.__setattr__(self, "_fdwell", _as_fraction(self.dwell))

    @classmethod
    def static(cls, graph: WeightedGraph, dwell: float = 1.0) -> "GraphSchedule":
        return cls((graph,), dwell)

    @property
    def n(self) -> int:
        return self.graphs[0].n

    @property
    def period(self) -> float:
        return self.dwell * len(self.graphs)

    def index_at(self, t: float) -> int:
        # small relative guard so that t = k*dwell computed in floating point
        # lands on graph k, not k-1
        k = math.floor(t / self.dwell + 1e-9)
        return k % len(self.graphs)

    def graph_at(self, t: float) -> WeightedGraph:
        return self.graphs[self.index_at(t)]

    def __len__(self):
        return len(self.graphs)


def round_robin_index(t: float, count: int = 4, dwell: float = 0.1) -> int:
    """1-based index of the active graph under cyclic switching.

    Away from switching instants this agrees with the ceiling/floor
    switching command ``ceil(10 t - 4 floor(2.5 t))`` used for four graphs
    and a 0.1 s dwell; at the instants themselves the round-robin reading is
    right-continuous.
    """
    return math.floor(t / dwell + 1e-9) % count + 1


def _as_fraction(x: float) -> Fraction:
    return Fraction(repr(float(x))).limit_denominator(10**9)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _check_weight_range(weight_range) -> tuple[float, float]:
    lo, hi = (float(v) for v in weight_range)
    if not (lo > 0 and lo <= hi):
        raise ParameterError(f"weight range must satisfy 0 < lo <= hi, got [{lo}, {hi}]")
    return lo, hi


def build_erdos_renyi(n: int, p: float, weight_range=(0.5, 1.0), seed=None) -> WeightedGraph:
    """Erdős–Rényi G(n, p) with link weights uniform in ``weight_range``."""
    if n < 2:
        raise ParameterError(f"n must be at least 2, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"edge probability must lie in [0, 1], got {p}")
    lo, hi = _check_weight_range(weight_range)
    rng = _rng(seed)
    iu = np.triu_indices(n, k=1)
    present = rng.random(iu[0].size) < p
    draws = rng.uniform(lo, hi, size=iu[0].size)
    w = np.zeros((n, n))
    w[iu] = np.where(present, draws, 0.0)
    return WeightedGraph(w + w.T)


def build_cycle(n: int, weight_range=(0.5, 1.0), seed=None) -> WeightedGraph:
    """Ring ``0-1-...-(n-1)-0`` with random link weights."""
    if n < 3:
        raise ParameterError(f"a cycle needs n >= 3, got {n}")
    lo, hi = _check_weight_range(weight_range)
    rng = _rng(seed)
    w = np.zeros((n, n))
    idx = np.arange(n)
    w[idx, (idx + 1) % n] = rng.uniform(lo, hi, size=n)
    return WeightedGraph(w + w.T)


def build_complete(n: int, weight: float = 1.0) -> WeightedGraph:
    if n < 2:
        raise ParameterError(f"n must be at least 2, got {n}")
    if not weight > 0:
        raise ParameterError("weight must be positive")
    w = np.full((n, n), float(weight))
    np.fill_diagonal(w, 0.0)
    return WeightedGraph(w)


def union_graph(graphs: Sequence[WeightedGraph]) -> WeightedGraph:
    """Entrywise sum of weight matrices; a link is present if present anywhere."""
    graphs = list(graphs)
    if not graphs:
        raise ParameterError("union of an empty list is undefined")
    n = graphs[0].n
    if any(g.n != n for g in graphs):
        raise DimensionError("all graphs must have the same number of agents")
    total = np.zeros((n, n))
    for g in graphs:
        total += g.weights
    return WeightedGraph(total)


def is_connected(graph: WeightedGraph) -> bool:
    if graph.n == 1:
        return True
    n_comp, _ = connected_components(graph.weights > 0, directed=False)
    return n_comp == 1


def laplacian(graph: WeightedGraph) -> np.ndarray:
    return np.diag(graph.degrees()) - graph.weights


def algebraic_connectivity(graph: WeightedGraph) -> float:
    """Second-smallest Laplacian eigenvalue (Fiedler value)."""
    if graph.n < 2:
        return 0.0
    eig = np.linalg.eigvalsh(laplacian(graph))
    return float(eig[1])


def _lcm(x: Fraction, y: Fraction) -> Fraction:
    den = math.lcm(x.denominator, y.denominator)
    a, b = int(x * den), int(y * den)
    return Fraction(math.lcm(a, b), den)


def check_uniform_connectivity(schedule: GraphSchedule, window: float, max_windows: int = 100_000) -> bool:
    """True iff every window-aligned interval ``[k*window, (k+1)*window)`` sees a connected union.

    Windows are checked until the joint pattern of switching and windows
    repeats (the least common multiple of the schedule period and the window,
    capped at ``max_windows`` windows).
    """
    if not window >= schedule.dwell:
        raise ParameterError(f"window ({window}) must be at least the dwell time ({schedule.dwell})")
    fw = _as_fraction(window)
    fd = schedule._fdwell
    m = len(schedule.graphs)
    horizon = _lcm(fd * m, fw)
    n_windows = min(int(horizon / fw), max_windows)
    for k in range(n_windows):
        start, end = k * fw, (k + 1) * fw
        first = math.floor(start / fd)
        last = math.ceil(end / fd) - 1
        active = {j % m for j in range(first, last + 1)}
        if not is_connected(union_graph([schedule.graphs[j] for j in sorted(active)])):
            return False
    return True


def build_switching_erdos_renyi(
    n: int,
    p: float,
    count: int = 4,
    weight_range=(0.5, 1.0),
    seed=None,
    max_tries: int = 100,
) -> list[WeightedGraph]:
    """``count`` ER graphs whose union is connected.

    Individual graphs are typically disconnected.  If the union is not
    connected the whole batch is redrawn from the next seed in the stream,
    up to ``max_tries`` times.
    """
    ss = np.random.SeedSequence(seed)
    for child in ss.spawn(max_tries):
        seeds = child.spawn(count)
        graphs = [build_erdos_renyi(n, p, weight_range, seed=s) for s in seeds]
        if is_connected(union_graph(graphs)):
            return graphs
    raise ParameterError(
        f"no connected union of {count} ER({n}, {p}) graphs found in {max_tries} tries; increase p"
    )


def to_triples(graph: WeightedGraph) -> str:
    """Plain-text adjacency: a ``# n=<n>`` header then one ``i j w`` line per link (i < j)."""
    lines = [f"# n={graph.n}"]
    ii, jj = np.nonzero(np.triu(graph.weights, k=1) > 0)
    for i, j in zip(ii, jj):
        lines.append(f"{i} {j} {float(graph.weights[i, j])!r}")
    return "\n".join(lines) + "\n"


def from_triples(text: str, n: int | None = None) -> WeightedGraph:
    """Inverse of :func:`to_triples`. Without a header, ``n`` is inferred from the largest index."""
    entries = []
    header_n = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("n="):
                header_n = int(body[2:])
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParameterError(f"line {lineno}: expected 'i j w', got {raw!r}")
        try:
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ParameterError(f"line {lineno}: cannot parse {raw!r}") from None
        if i == j or i < 0 or j < 0 or w < 0:
            raise ParameterError(f"line {lineno}: invalid link {raw!r}")
        entries.append((i, j, w))
    size = n if n is not None else header_n
    if size is None:
        size = 1 + max((max(i, j) for i, j, _ in entries), default=0)
    w = np.zeros((size, size))
    for i, j, val in entries:
        if max(i, j) >= size:
            raise DimensionError(f"link ({i}, {j}) out of range for n={size}")
        w[i, j] = w[j, i] = val
    return WeightedGraph(w)


def write_triples(graph: WeightedGraph, path) -> None:
    Path(path).write_text(to_triples(graph))


def read_triples(path, n: int | None = None) -> WeightedGraph:
    return from_triples(Path(path).read_text(), n=n)

