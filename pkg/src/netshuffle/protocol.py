"""Simulation of the network-shuffle protocols.

Four protocols share one engine:

``rnd_wlk``
    every client randomizes its datum and the report takes ``T`` uniform
    neighbour steps;
``infinite``
    every report is sent straight to a vertex drawn from the stationary
    distribution;
``smpl_wlk``
    like ``rnd_wlk`` but each client reports only with probability ``p``;
``restricted``
    like ``rnd_wlk`` but only the clients in a fixed subset report.

Each report walks independently. That is the same process as forwarding
everything held at every round, because a forward never depends on what else
sits on the vertex.

Randomness layout. Trial ``i`` reads a block of uniforms of shape ``(n, w)``
where row ``u`` belongs to client ``u``: column 0 drives the randomizer,
column 1 the participation coin, columns 2.. the walk steps (or the stationary
destination draw). Trials are grouped into fixed-size chunks and chunk ``c``
draws from ``PCG64(SeedSequence(seed, spawn_key=(c,)))``, so trial ``i`` sees
the same numbers whatever the trial count, worker count or kernel backend.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from netshuffle import kernels
from netshuffle.graph import (
    Graph,
    GraphError,
    NonErgodicError,
    graph_rounds,
    stationary_distribution,
    validate_ergodic,
)
from netshuffle.randomizer import Randomizer

PROTOCOLS = ("rnd_wlk", "infinite", "smpl_wlk", "restricted")
_CHUNK_FLOATS = 1 << 21
_MAX_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class ProtocolConfig:
    graph: Graph
    randomizer: Randomizer
    rounds: int | str = "auto"
    seed: int = 0

    def resolve_rounds(self) -> int:
        if self.rounds == "auto":
            eps0 = self.randomizer.claimed_eps0
            if not (0 < eps0 < math.inf):
                raise ValueError("rounds='auto' needs a randomizer with finite positive eps0")
            return graph_rounds(self.graph, eps0)
        t = int(self.rounds)
        if t < 0:
            raise ValueError("rounds must be >= 0")
        return t


@dataclass(frozen=True)
class MultisetPartition:
    """Reports held by each client at the end, as sorted tuples."""

    per_client: tuple[tuple[int, ...], ...]

    @classmethod
    def from_assignment(cls, n: int, dest, values, released=None) -> "MultisetPartition":
        bins: list[list[int]] = [[] for _ in range(n)]
        for u in range(len(dest)):
            if released is None or released[u]:
                bins[int(dest[u])].append(int(values[u]))
        return cls(tuple(tuple(sorted(b)) for b in bins))

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.per_client)

    def union(self) -> tuple[int, ...]:
        return tuple(sorted(v for s in self.per_client for v in s))

    def to_json(self) -> str:
        return json.dumps([list(s) for s in self.per_client], separators=(",", ":"))


# ---------------------------------------------------------------------------
# partition codes: integer keys for counts[client, symbol]
# ---------------------------------------------------------------------------


def partition_powers(n: int, k: int, max_count: int | None = None) -> np.ndarray:
    """Place values ``base ** (client * k + symbol)`` with ``base = max_count + 1``."""
    base = (n if max_count is None else max_count) + 1
    if n * k * math.log2(base) >= 62:
        raise OverflowError(f"partition codes for n={n}, k={k} do not fit in 64 bits")
    return base ** np.arange(n * k, dtype=np.int64)


def decode_partition(code: int, n: int, k: int, max_count: int | None = None) -> tuple:
    base = (n if max_count is None else max_count) + 1
    code = int(code)
    per_client = []
    for _ in range(n):
        held: list[int] = []
        for y in range(k):
            code, c = divmod(code, base)
            held.extend([y] * c)
        per_client.append(tuple(held))
    return tuple(per_client)


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SimulationBatch:
    protocol: str
    seed: int
    rounds: int | None  # None for the infinite protocol
    outputs: np.ndarray  # (trials, n) randomized value of each client
    dest: np.ndarray  # (trials, n) vertex where that value ended up
    released: np.ndarray  # (trials, n) whether the client reported

    @property
    def trials(self) -> int:
        return self.outputs.shape[0]

    @property
    def n(self) -> int:
        return self.outputs.shape[1]

    def partition(self, i: int) -> MultisetPartition:
        return MultisetPartition.from_assignment(self.n, self.dest[i], self.outputs[i], self.released[i])

    def partitions(self) -> list[MultisetPartition]:
        return [self.partition(i) for i in range(self.trials)]

    def destination_frequencies(self) -> np.ndarray:
        """``F[u, v]``: fraction of trials in which client ``u``'s report ended at ``v``.

        Trials where ``u`` did not report count toward no column.
        """
        n = self.n
        freq = np.zeros((n, n))
        for u in range(n):
            mask = self.released[:, u]
            freq[u] = np.bincount(self.dest[mask, u], minlength=n)
        return freq / max(self.trials, 1)

    def codes(self, k: int) -> np.ndarray:
        """Partition code of every trial (see :func:`partition_powers`)."""
        powers = partition_powers(self.n, k)
        idx = self.dest * k + self.outputs
        return np.where(self.released, powers[idx], 0).sum(axis=1)

    def json_lines(self) -> list[str]:
        return [
            json.dumps(
                {"seed": self.seed, "trial": i, "T": self.rounds,
                 "per_client": [list(s) for s in self.partition(i).per_client]},
                separators=(",", ":"),
            )
            for i in range(self.trials)
        ]


def _width(protocol: str, rounds: int) -> int:
    return 3 if protocol == "infinite" else 2 + rounds


def chunk_size(n: int, width: int) -> int:
    return max(1, min(_MAX_CHUNK, _CHUNK_FLOATS // (n * width)))


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def _check_data(cfg: ProtocolConfig, data) -> np.ndarray:
    x = np.asarray(data, dtype=np.int64)
    n = cfg.graph.n
    if x.shape != (n,):
        raise ValueError(f"data has length {x.size}, graph has {n} clients")
    k_in = cfg.randomizer.input_size
    if ((x < 0) | (x >= k_in)).any():
        raise ValueError(f"data values must lie in [0, {k_in})")
    return x


def _client_mask(n: int, clients) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    for c in clients:
        c = int(c)
        if not 0 <= c < n:
            raise ValueError(f"client {c} outside [0, {n})")
        mask[c] = True
    return mask


def _prepare(protocol, cfg, data, p, clients):
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}; choose from {', '.join(PROTOCOLS)}")
    x = _check_data(cfg, data)
    g = cfg.graph
    if protocol == "infinite":
        rounds = None
        stationary_distribution(g)
    else:
        if cfg.rounds == "auto" and not validate_ergodic(g).ergodic:
            raise NonErgodicError("rounds='auto' requires a connected, non-bipartite graph")
        rounds = cfg.resolve_rounds()
        if any(d == 0 for d in g.degrees):
            raise GraphError("graph has an isolated vertex; walks are undefined")
    mask = None
    if protocol == "smpl_wlk":
        if p is None or not 0 <= p <= 1:
            raise ValueError("smpl_wlk needs a sampling probability p in [0, 1]")
    elif protocol == "restricted":
        if clients is None:
            raise ValueError("restricted needs a client subset")
        mask = _client_mask(g.n, clients)
    return x, rounds, mask


def _run_block(protocol, cfg, x, rounds, p, mask, U, backend=None):
    trials, n, _ = U.shape
    r = cfg.randomizer
    rows = np.broadcast_to(x, (trials, n)).ravel()
    y = kernels.inverse_cdf(r.cdf, rows, U[:, :, 0].ravel(), backend).reshape(trials, n)
    if protocol == "smpl_wlk":
        released = U[:, :, 1] < p
    elif protocol == "restricted":
        released = np.broadcast_to(mask, (trials, n)).copy()
    else:
        released = np.ones((trials, n), dtype=bool)
    if protocol == "infinite":
        cdf = np.cumsum(stationary_distribution(cfg.graph))[None, :]
        dest = kernels.inverse_cdf(cdf, np.zeros(trials * n, dtype=np.int64), U[:, :, 2].ravel(), backend)
    else:
        indptr, indices = cfg.graph.csr
        starts = np.broadcast_to(np.arange(n, dtype=np.int64), (trials, n)).ravel()
        steps = U[:, :, 2:].reshape(trials * n, rounds)
        dest = kernels.walk_destinations(indptr, indices, starts, steps, backend)
    return y, dest.reshape(trials, n), released


def simulate(
    protocol: str,
    cfg: ProtocolConfig,
    data: Sequence[int],
    trials: int = 1,
    *,
    p: float | None = None,
    clients=None,
    workers: int = 1,
    backend: str | None = None,
) -> SimulationBatch:
    """Run ``trials`` independent executions; output depends only on the arguments' values."""
    if trials < 0:
        raise ValueError("trials must be >= 0")
    x, rounds, mask = _prepare(protocol, cfg, data, p, clients)
    n = cfg.graph.n
    width = _width(protocol, rounds)
    cs = chunk_size(n, width)
    bounds = [(c, min(cs, trials - c * cs)) for c in range(-(-trials // cs))]

    def run(chunk):
        c, size = chunk
        U = chunk_rng(cfg.seed, c).random((size, n, width))
        return _run_block(protocol, cfg, x, rounds, p, mask, U, backend)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]
    if parts:
        y, dest, rel = (np.concatenate(a) for a in zip(*parts))
    else:
        y = dest = np.zeros((0, n), dtype=np.int64)
        rel = np.zeros((0, n), dtype=bool)
    return SimulationBatch(protocol, cfg.seed, rounds, y, dest, rel)


def _single(protocol, cfg, data, rng, p=None, clients=None) -> MultisetPartition:
    if rng is None:
        return simulate(protocol, cfg, data, 1, p=p, clients=clients).partition(0)
    x, rounds, mask = _prepare(protocol, cfg, data, p, clients)
    U = rng.random((1, cfg.graph.n, _width(protocol, rounds)))
    y, dest, rel = _run_block(protocol, cfg, x, rounds, p, mask, U)
    return MultisetPartition.from_assignment(cfg.graph.n, dest[0], y[0], rel[0])


def run_rnd_wlk(cfg: ProtocolConfig, data, rng: np.random.Generator | None = None) -> MultisetPartition:
    """One execution of the random-walk shuffle.

    Without ``rng`` this is trial 0 of ``simulate("rnd_wlk", cfg, data)``.
    """
    return _single("rnd_wlk", cfg, data, rng)


def run_infinite(cfg: ProtocolConfig, data, rng: np.random.Generator | None = None) -> MultisetPartition:
    return _single("infinite", cfg, data, rng)


def run_smpl_wlk(cfg: ProtocolConfig, data, p: float, rng: np.random.Generator | None = None) -> MultisetPartition:
    return _single("smpl_wlk", cfg, data, rng, p=p)


def run_restricted(cfg: ProtocolConfig, data, clients, rng: np.random.Generator | None = None) -> MultisetPartition:
    return _single("restricted", cfg, data, rng, clients=clients)
