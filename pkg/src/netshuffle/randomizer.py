"""Finite-range local randomizers given as row-stochastic tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ROW_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Randomizer:
    """``table[x, y]`` is the probability of reporting ``y`` on input ``x``."""

    table: np.ndarray
    claimed_eps0: float
    claimed_delta0: float = 0.0
    name: str = "custom"
    private: bool = True
    cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.ndim != 2 or t.shape[0] < 1 or t.shape[1] < 1:
            raise ValueError("table must be a non-empty 2-D array")
        if (t < 0).any():
            raise ValueError("table entries must be non-negative")
        bad = np.flatnonzero(np.abs(t.sum(axis=1) - 1.0) > ROW_TOL)
        if bad.size:
            raise ValueError(f"row {int(bad[0])} does not sum to 1")
        if not 0 <= self.claimed_delta0 <= 1:
            raise ValueError("claimed_delta0 must lie in [0, 1]")
        t.setflags(write=False)
        cdf = np.cumsum(t, axis=1)
        cdf.setflags(write=False)
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "cdf", cdf)

    @property
    def input_size(self) -> int:
        return self.table.shape[0]

    @property
    def output_size(self) -> int:
        return self.table.shape[1]

    def spec(self) -> dict:
        out = {"kind": self.name, "eps0": self.claimed_eps0}
        if self.name in ("kary_rr", "identity"):
            out["k"] = self.output_size
        return out


def binary_rr(eps0: float) -> Randomizer:
    return _rr(eps0, 2, strict=True, name="binary_rr")


def kary_rr(eps0: float, k: int, *, strict: bool = True) -> Randomizer:
    """k-ary randomized response.

    ``strict=False`` admits ``eps0 == 0`` (the uniform table), which is only
    useful as a test fixture.
    """
    return _rr(eps0, k, strict=strict, name="kary_rr")


def _rr(eps0: float, k: int, *, strict: bool, name: str) -> Randomizer:
    if k < 2:
        raise ValueError("k must be at least 2")
    if eps0 < 0 or (strict and eps0 == 0) or not math.isfinite(eps0):
        raise ValueError(f"eps0 must be positive and finite, got {eps0}")
    e = math.exp(eps0)
    keep = e / (e + k - 1)
    other = 1.0 / (e + k - 1)
    t = np.full((k, k), other)
    np.fill_diagonal(t, keep)
    return Randomizer(t, claimed_eps0=float(eps0), name=name)


def identity(k: int) -> Randomizer:
    """Deterministic pass-through; not private."""
    return Randomizer(np.eye(k), claimed_eps0=math.inf, name="identity", private=False)


def from_spec(spec: dict) -> Randomizer:
    kind = spec.get("kind")
    if kind == "binary_rr":
        return binary_rr(float(spec["eps0"]))
    if kind == "kary_rr":
        return kary_rr(float(spec["eps0"]), int(spec["k"]))
    if kind == "identity":
        return identity(int(spec.get("k", 2)))
    raise ValueError(f"unknown randomizer kind {kind!r}")


def apply(r: Randomizer, x: int, rng: np.random.Generator) -> int:
    if not 0 <= x < r.input_size:
        raise ValueError(f"input {x} outside [0, {r.input_size})")
    u = rng.random()
    row = r.cdf[x]
    j = int(np.searchsorted(row, u, side="right"))
    return min(j, r.output_size - 1)


def verify_ldp(r: Randomizer) -> float:
    """Smallest eps such that every output likelihood ratio is within ``e^eps``.

    Pairs where both probabilities are 0 are skipped; ``p / 0`` gives ``inf``.
    """
    t = r.table
    worst = 0.0
    for y in range(t.shape[1]):
        col = t[:, y]
        pos = col[col > 0]
        if pos.size == 0:
            continue
        if pos.size < col.size:
            return math.inf
        worst = max(worst, math.log(pos.max()) - math.log(pos.min()))
    return worst
