"""Communication graphs: construction, ergodicity, spectra and walk distributions."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

EIG_TOL = 1e-8
TOPOLOGIES = ("complete", "cycle", "path", "star", "erdos_renyi", "random_regular")


class GraphError(ValueError):
    pass


class GraphParseError(GraphError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class NonErgodicError(GraphError):
    pass


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on vertices ``0..n-1``.

    Use :func:`build_graph` rather than the constructor; it validates the edge
    list and fills in ``degrees`` and ``m``.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    degrees: tuple[int, ...] = field(compare=False)
    m: int = field(compare=False)

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1.0
        return a

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """``(indptr, indices)`` with each neighbour list sorted ascending."""
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(x) for x in nbrs])
        flat = [w for x in nbrs for w in sorted(x)]
        return indptr, np.asarray(flat, dtype=np.int64)

    def neighbors(self, u: int) -> list[int]:
        indptr, indices = self.csr
        return indices[indptr[u] : indptr[u + 1]].tolist()


@dataclass(frozen=True)
class ErgodicityReport:
    connected: bool
    bipartite: bool

    @property
    def ergodic(self) -> bool:
        return self.connected and not self.bipartite


@dataclass(frozen=True)
class SpectralInfo:
    eigenvalues: np.ndarray  # non-increasing
    gap: float


def build_graph(n: int, edges) -> Graph:
    if n < 1:
        raise GraphError(f"vertex count must be >= 1, got {n}")
    seen: set[tuple[int, int]] = set()
    degrees = [0] * n
    for e in edges:
        u, v = (int(x) for x in e)
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u}, {v}) has an endpoint outside [0, {n})")
        if u == v:
            raise GraphError(f"edge ({u}, {v}) is a self-loop")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphError(f"edge ({u}, {v}) is a duplicate")
        seen.add(key)
        degrees[u] += 1
        degrees[v] += 1
    return Graph(n=n, edges=tuple(sorted(seen)), degrees=tuple(degrees), m=len(seen))


def validate_ergodic(g: Graph) -> ErgodicityReport:
    # BFS 2-colouring; a colour clash anywhere means an odd cycle.
    colour = [-1] * g.n
    components = 0
    bipartite = True
    for s in range(g.n):
        if colour[s] != -1:
            continue
        components += 1
        colour[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in g.neighbors(u):
                if colour[v] == -1:
                    colour[v] = 1 - colour[u]
                    queue.append(v)
                elif colour[v] == colour[u]:
                    bipartite = False
    return ErgodicityReport(connected=components == 1, bipartite=bipartite)


def _require_no_isolated(g: Graph) -> None:
    for u, d in enumerate(g.degrees):
        if d == 0:
            raise GraphError(f"vertex {u} is isolated; the walk is undefined there")


def transition_matrix(g: Graph) -> np.ndarray:
    """Column-stochastic ``P = A D^{-1}``: column ``v`` is the step distribution from ``v``."""
    _require_no_isolated(g)
    return g.adjacency / np.asarray(g.degrees, dtype=float)[None, :]


def stationary_distribution(g: Graph) -> np.ndarray:
    if g.m == 0:
        raise GraphError("graph has no edges; stationary distribution undefined")
    return np.asarray(g.degrees, dtype=float) / (2.0 * g.m)


def spectral_gap(g: Graph) -> SpectralInfo:
    """Spectrum of the walk matrix and its gap ``min(1 - a_2, 1 - |a_n|)``.

    ``P`` is not symmetric unless the graph is regular, so the eigenvalues are
    taken from the similar matrix ``D^{-1/2} A D^{-1/2}``.
    """
    _require_no_isolated(g)
    s = 1.0 / np.sqrt(np.asarray(g.degrees, dtype=float))
    sym = g.adjacency * s[:, None] * s[None, :]
    try:
        ev = np.linalg.eigvalsh(sym)[::-1].copy()
    except np.linalg.LinAlgError as exc:
        raise GraphError(f"eigensolver failed: {exc}") from exc
    if g.n == 1:
        return SpectralInfo(eigenvalues=ev, gap=0.0)
    gap = min(1.0 - ev[1], 1.0 - abs(ev[-1]))
    if gap < EIG_TOL:
        gap = 0.0
    return SpectralInfo(eigenvalues=ev, gap=float(min(gap, 1.0)))


def walk_distribution(g: Graph, start: int, t: int) -> np.ndarray:
    if t < 0:
        raise ValueError("step count must be >= 0")
    if not 0 <= start < g.n:
        raise ValueError(f"start vertex {start} outside [0, {g.n})")
    p = np.zeros(g.n)
    p[start] = 1.0
    if t == 0:
        return p
    P = transition_matrix(g)
    for _ in range(t):
        p = P @ p
    return p


def walk_distributions(g: Graph, t: int) -> np.ndarray:
    """All start vertices at once: column ``u`` equals ``walk_distribution(g, u, t)``."""
    if t < 0:
        raise ValueError("step count must be >= 0")
    Q = np.eye(g.n)
    if t == 0:
        return Q
    P = transition_matrix(g)
    for _ in range(t):
        Q = P @ Q
    return Q


def mixing_bound(n: int, gap: float, t: int) -> float:
    if gap <= 0:
        raise NonErgodicError("spectral gap must be positive")
    if gap > 1:
        raise ValueError("spectral gap cannot exceed 1")
    if t < 0:
        raise ValueError("step count must be >= 0")
    return math.sqrt(n) * (1.0 - gap) ** t


def recommended_rounds(gap: float, n: int, eps0: float) -> int:
    """Walk length ``ceil(ln(n^4.5 / eps0) / gap)``, never negative."""
    if gap <= 0:
        raise NonErgodicError("graph is not ergodic (spectral gap is 0)")
    if gap > 1:
        raise ValueError("spectral gap cannot exceed 1")
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")
    if n < 2:
        raise ValueError("need at least 2 vertices")
    x = (4.5 * math.log(n) - math.log(eps0)) / gap
    # absorb round-off so an exact integer does not ceil one step up
    return max(0, math.ceil(x - 1e-9))


def graph_rounds(g: Graph, eps0: float) -> int:
    if not validate_ergodic(g).ergodic:
        raise NonErgodicError("graph is not ergodic; cannot derive a walk length")
    return recommended_rounds(spectral_gap(g).gap, g.n, eps0)


# ---------------------------------------------------------------------------
# topology families
# ---------------------------------------------------------------------------


def complete_graph(n: int) -> Graph:
    return build_graph(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise GraphError("a cycle needs at least 3 vertices")
    return build_graph(n, [(u, (u + 1) % n) for u in range(n)])


def path_graph(n: int) -> Graph:
    return build_graph(n, [(u, u + 1) for u in range(n - 1)])


def star_graph(n: int) -> Graph:
    return build_graph(n, [(0, u) for u in range(1, n)])


def _erdos_renyi(n: int, p: float, rng: np.random.Generator) -> Graph:
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.shape[0]) < p
    return build_graph(n, zip(iu[keep].tolist(), ju[keep].tolist()))


def _random_regular(n: int, d: int, seed: int) -> Graph:
    import networkx as nx

    nxg = nx.random_regular_graph(d, n, seed=seed)
    return build_graph(n, nxg.edges())


def generate_topology(
    kind: str, n: int, seed: int = 0, *, p: float | None = None, d: int | None = None,
    max_tries: int = 100,
) -> Graph:
    """Graph from a named family.

    Deterministic families are returned as is, even when not ergodic. Random
    families are redrawn from seeds derived from ``seed`` until the result is
    connected and non-bipartite, or ``max_tries`` draws have failed.
    """
    if kind == "complete":
        return complete_graph(n)
    if kind == "cycle":
        return cycle_graph(n)
    if kind == "path":
        return path_graph(n)
    if kind == "star":
        return star_graph(n)
    if kind == "erdos_renyi":
        if p is None or not 0 <= p <= 1:
            raise GraphError("erdos_renyi needs an edge probability p in [0, 1]")
        draw = lambda i: _erdos_renyi(n, p, np.random.default_rng([seed, i]))  # noqa: E731
        label = f"erdos_renyi(n={n}, p={p}, seed={seed})"
    elif kind == "random_regular":
        if d is None or d < 0 or d >= n or (n * d) % 2:
            raise GraphError("random_regular needs 0 <= d < n with n*d even")
        draw = lambda i: _random_regular(n, d, seed * 1_000_003 + i)  # noqa: E731
        label = f"random_regular(n={n}, d={d}, seed={seed})"
    else:
        raise GraphError(f"unknown topology {kind!r}; choose from {', '.join(TOPOLOGIES)}")
    for i in range(max_tries):
        g = draw(i)
        if validate_ergodic(g).ergodic:
            return g
    raise GraphError(f"no ergodic draw of {label} in {max_tries} tries")


# ---------------------------------------------------------------------------
# edge-list files
# ---------------------------------------------------------------------------


def parse_edge_list(text: str) -> Graph:
    declared = None
    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    first = True
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if first and parts[0] == "n":
            first = False
            if len(parts) != 2:
                raise GraphParseError("expected 'n <count>'", lineno)
            try:
                declared = int(parts[1])
            except ValueError:
                raise GraphParseError(f"bad vertex count {parts[1]!r}", lineno) from None
            continue
        first = False
        if len(parts) != 2:
            raise GraphParseError(f"expected 'u v', got {line!r}", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphParseError(f"non-integer vertex in {line!r}", lineno) from None
        if u < 0 or v < 0:
            raise GraphParseError(f"negative vertex in {line!r}", lineno)
        if declared is not None and max(u, v) >= declared:
            raise GraphParseError(f"vertex out of range [0, {declared}) in {line!r}", lineno)
        if u == v:
            raise GraphParseError(f"self-loop {line!r}", lineno)
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphParseError(f"duplicate edge {line!r}", lineno)
        seen.add(key)
        edges.append((u, v))
    n = declared if declared is not None else 1 + max((max(e) for e in edges), default=-1)
    if n < 1:
        raise GraphParseError("no vertices")
    try:
        return build_graph(n, edges)
    except GraphError as exc:
        raise GraphParseError(str(exc)) from None


def read_edge_list(path) -> Graph:
    return parse_edge_list(Path(path).read_text(encoding="utf-8"))


def format_edge_list(g: Graph) -> str:
    lines = [f"n {g.n}"] + [f"{u} {v}" for u, v in g.edges]
    return "\n".join(lines) + "\n"
