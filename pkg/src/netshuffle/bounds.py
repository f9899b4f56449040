"""Closed-form privacy amplification bounds.

Every calculator returns a :class:`PrivacyBound`. Outside a bound's stated
precondition the result has ``valid=False`` and ``eps``/``delta`` set to
``None``; nothing here returns NaN or infinity for a privacy parameter.

All logarithms are natural.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from netshuffle.graph import Graph, GraphError, spectral_gap, stationary_distribution, validate_ergodic

MODELS = ("fmt", "netshuffle", "smpl_wlk", "partial", "subsample_wor", "liew_metric")


@dataclass(frozen=True)
class BoundInputs:
    eps0: float
    n: int
    delta: float
    delta0: float = 0.0
    p: float | None = None
    l: int | None = None  # noqa: E741

    def __post_init__(self):
        if not self.eps0 > 0:
            raise ValueError("eps0 must be positive")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if not 0 <= self.delta0 <= 1:
            raise ValueError("delta0 must lie in [0, 1]")
        if self.p is not None and not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")
        if self.l is not None and not 0 <= self.l <= self.n:
            raise ValueError("l must lie in [0, n]")


@dataclass(frozen=True)
class PrivacyBound:
    model: str
    eps: float | None
    delta: float | None
    valid: bool
    validity_condition: str
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _shuffle_eps(eps0: float, size: float, delta: float, scale: float = 1.0) -> float:
    """``ln(1 + tanh(eps0/2) * (scale * 8 sqrt(e^eps0 ln(4/delta)) / sqrt(size) + 8 e^eps0 / size))``."""
    e0 = math.exp(eps0)
    inner = scale * 8.0 * math.sqrt(e0 * math.log(4.0 / delta)) / math.sqrt(size) + 8.0 * e0 / size
    # (e^x - 1) / (e^x + 1) == tanh(x / 2)
    return math.log1p(math.tanh(eps0 / 2.0) * inner)


def _shuffle_condition(eps0: float, size: float, delta: float) -> bool:
    if size <= 0:
        return False
    return eps0 <= math.log(size / (16.0 * math.log(2.0 / delta)))


def _invalid(model: str, condition: str, **notes) -> PrivacyBound:
    return PrivacyBound(model, None, None, False, condition, dict(notes))


def delta_prime(eps: float, *, eps0: float, n: float, delta: float, delta0: float) -> float:
    """``delta + (e^eps + 1)(1 + e^-eps0 / 2) * n * delta0``.

    ``n`` is the number of shuffled reports (``l`` for a partial shuffle).
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if delta0 == 0:
        return delta
    return delta + (math.exp(eps) + 1.0) * (1.0 + math.exp(-eps0) / 2.0) * n * delta0


def _dprime(eps: float, inp: BoundInputs, size: float | None = None) -> float:
    return delta_prime(eps, eps0=inp.eps0, n=inp.n if size is None else size,
                       delta=inp.delta, delta0=inp.delta0)


def fmt_shuffle_bound(inp: BoundInputs) -> PrivacyBound:
    """Amplification by uniform shuffling of ``n`` locally randomized reports."""
    cond = f"eps0 <= ln(n / (16 ln(2/delta))) [n={inp.n}, delta={inp.delta:g}]"
    if not _shuffle_condition(inp.eps0, inp.n, inp.delta):
        return _invalid("fmt", cond)
    eps = _shuffle_eps(inp.eps0, inp.n, inp.delta)
    return PrivacyBound("fmt", eps, _dprime(eps, inp), True, cond)


def netshuffle_bound(inp: BoundInputs) -> PrivacyBound:
    """Random-walk shuffle with the recommended walk length.

    The shuffle epsilon (before the ``eps0 / n`` penalty) is the one fed to
    ``delta_prime``; ``notes["delta_with_total_eps"]`` gives the alternative.
    """
    cond = f"eps0 <= ln(n / (16 ln(2/delta))) [n={inp.n}, delta={inp.delta:g}]"
    if not _shuffle_condition(inp.eps0, inp.n, inp.delta):
        return _invalid("netshuffle", cond)
    shuffle = _shuffle_eps(inp.eps0, inp.n, inp.delta)
    eps = inp.eps0 / inp.n + shuffle
    factor = math.exp(inp.eps0 / (2.0 * inp.n))
    delta = factor * _dprime(shuffle, inp)
    return PrivacyBound(
        "netshuffle", eps, delta, True, cond,
        {"delta_prime_eps": "shuffle", "shuffle_eps": shuffle,
         "delta_with_total_eps": factor * _dprime(eps, inp)},
    )


def subsample_wor(eps: float, delta: float, l: int, n: int) -> PrivacyBound:  # noqa: E741
    """Sampling ``l`` of ``n`` records without replacement before an (eps, delta) mechanism."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if l < 0 or l > n:
        raise ValueError(f"sample size l={l} must lie in [0, n={n}]")
    if eps < 0 or not 0 <= delta <= 1:
        raise ValueError("need eps >= 0 and delta in [0, 1]")
    q = l / n
    return PrivacyBound(
        "subsample_wor", math.log1p(q * math.expm1(eps)), q * delta, True, "0 <= l <= n"
    )


def lambda_p(p: float, n: int, delta: float) -> float:
    """Sampling slack ``sqrt(2 p (1-p) / n * ln(2/delta)) + 2 ln(2/delta) / (3n)``."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    lg = math.log(2.0 / delta)
    return math.sqrt(2.0 * p * (1.0 - p) / n * lg) + 2.0 * lg / (3.0 * n)


def smpl_wlk_bound(inp: BoundInputs) -> PrivacyBound:
    """Poisson subsampling with rate ``p`` followed by the random-walk shuffle.

    ``k = n p`` is allowed to be fractional.
    """
    if inp.p is None:
        raise ValueError("smpl_wlk needs p")
    if not inp.delta < 1:
        raise ValueError("smpl_wlk needs delta < 1")
    n, p, delta, eps0 = inp.n, inp.p, inp.delta, inp.eps0
    lam = lambda_p(p, n, delta)
    k = n * p
    slack = k - n * lam
    cond = f"k - n lambda(p) > 0 and eps0 <= ln((k - n lambda(p)) / (16 ln(2/delta))) [k={k:g}, lambda={lam:.6g}]"
    if not _shuffle_condition(eps0, slack, delta):
        return _invalid("smpl_wlk", cond, lambda_p=lam)
    frac = k / n + lam
    shuffle = _shuffle_eps(eps0, n, delta, scale=math.sqrt(frac))
    eps = eps0 / n + shuffle
    factor = math.exp(eps0 / (2.0 * n))
    d0_term = 0.0
    if inp.delta0:
        d0_term = (math.exp(shuffle) + 1.0) * (1.0 + math.exp(-eps0) / 2.0) * (k + n * lam) * inp.delta0
    out_delta = delta + frac * factor * (delta + d0_term)
    return PrivacyBound(
        "smpl_wlk", eps, out_delta, True, cond,
        {"lambda_p": lam, "k": k, "delta_prime_eps": "shuffle", "shuffle_eps": shuffle},
    )


def partial_shuffle_bound(inp: BoundInputs) -> PrivacyBound:
    """Random-walk shuffle in which only ``l`` fixed clients report.

    The precondition uses ``delta`` (as every sibling bound does), not ``delta0``.
    """
    if inp.l is None:
        raise ValueError("partial needs l")
    l, n, eps0 = inp.l, inp.n, inp.eps0  # noqa: E741
    cond = f"eps0 <= ln(l / (16 ln(2/delta))) [l={l}, delta={inp.delta:g}]"
    notes = {"condition_uses": "delta (stated elsewhere with delta0)"}
    if not _shuffle_condition(eps0, l, inp.delta):
        return _invalid("partial", cond, **notes)
    shuffle = _shuffle_eps(eps0, l, inp.delta)
    eps = eps0 / n + shuffle
    delta = math.exp(eps0 / (2.0 * n)) * _dprime(shuffle, inp, size=l)
    notes.update(delta_prime_eps="shuffle", shuffle_eps=shuffle)
    return PrivacyBound("partial", eps, delta, True, cond, notes)


def liew_topology_metric(g: Graph, T: float) -> float:
    """``sqrt(sum_i pi_i^2 + (1 - gap)^(2T))``, the topology term of the earlier bound.

    ``T`` may be ``math.inf``, in which case the second term is dropped. A
    bipartite graph is accepted with a warning: its degree-proportional
    stationary distribution still exists even though the walk does not mix.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    rep = validate_ergodic(g)
    if not rep.connected:
        raise GraphError("graph is disconnected")
    pi = stationary_distribution(g)
    s = float(np.dot(pi, pi))
    if rep.bipartite:
        warnings.warn("graph is bipartite; the walk is not ergodic", RuntimeWarning, stacklevel=2)
    if math.isinf(T):
        return math.sqrt(s)
    gap = spectral_gap(g).gap
    return math.sqrt(s + (1.0 - gap) ** (2 * T))


def bernstein_radius(variance: float, c: float, beta: float) -> float:
    """Deviation ``sqrt(2 var ln(2/beta)) + 2 c ln(2/beta) / 3`` exceeded with probability <= beta."""
    if variance < 0:
        raise ValueError("variance must be >= 0")
    if c <= 0:
        raise ValueError("c must be positive")
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    lg = math.log(2.0 / beta)
    return math.sqrt(2.0 * variance * lg) + 2.0 * c * lg / 3.0


def compute(model: str, *, eps0=None, n=None, delta=None, delta0=0.0, p=None, l=None,  # noqa: E741
            eps=None, graph: Graph | None = None, T=None) -> PrivacyBound:
    """Dispatch by model name; used by the CLI and the sweeps."""
    if model == "subsample_wor":
        if eps is None or l is None or n is None:
            raise ValueError("subsample_wor needs eps, l and n")
        return subsample_wor(eps, delta if delta is not None else 0.0, l, n)
    if model == "liew_metric":
        if graph is None:
            raise ValueError("liew_metric needs a graph")
        value = liew_topology_metric(graph, math.inf if T is None else T)
        return PrivacyBound("liew_metric", value, None, True, "connected graph")
    if eps0 is None or n is None or delta is None:
        raise ValueError(f"{model} needs eps0, n and delta")
    inp = BoundInputs(eps0=eps0, n=n, delta=delta, delta0=delta0, p=p, l=l)
    if model == "fmt":
        return fmt_shuffle_bound(inp)
    if model == "netshuffle":
        return netshuffle_bound(inp)
    if model == "smpl_wlk":
        return smpl_wlk_bound(inp)
    if model == "partial":
        return partial_shuffle_bound(inp)
    raise ValueError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")
