"""Exact and Monte Carlo verification of the privacy claims on small instances."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from netshuffle import kernels
from netshuffle.bounds import (
    BoundInputs,
    bernstein_radius,
    fmt_shuffle_bound,
    netshuffle_bound,
    partial_shuffle_bound,
)
from netshuffle.graph import (
    Graph,
    mixing_bound,
    recommended_rounds,
    spectral_gap,
    NonErgodicError,
    stationary_distribution,
    transition_matrix,
    validate_ergodic,
    walk_distributions,
)
from netshuffle.protocol import (
    ProtocolConfig,
    _check_data,
    _client_mask,
    decode_partition,
    partition_powers,
    simulate,
)
from netshuffle.randomizer import Randomizer, verify_ldp

DEFAULT_BUDGET = 10**7
EXACT_PROTOCOLS = ("rnd_wlk", "infinite", "restricted")


class EnumerationBudgetExceeded(RuntimeError):
    pass


def enumeration_budget() -> int:
    raw = os.environ.get("NETSHUFFLE_BUDGET")
    return int(float(raw)) if raw else DEFAULT_BUDGET


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    """Probability of each canonical partition (a tuple of sorted per-client tuples)."""

    atoms: dict
    label: str = "exact"  # "estimate" for Monte Carlo frequencies
    trials: int | None = None

    def prob(self, key) -> float:
        return self.atoms.get(key, 0.0)

    def total(self) -> float:
        return math.fsum(self.atoms.values())

    def event(self, keys) -> float:
        return math.fsum(self.atoms.get(k, 0.0) for k in keys)

    def wilson(self, key, z: float = 3.0) -> tuple[float, float]:
        if self.trials is None:
            raise ValueError("confidence intervals need a Monte Carlo estimate")
        return wilson_interval(round(self.prob(key) * self.trials), self.trials, z)


def wilson_interval(count: int, trials: int, z: float = 3.0) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    ph = count / trials
    den = 1 + z * z / trials
    centre = (ph + z * z / (2 * trials)) / den
    half = z * math.sqrt(ph * (1 - ph) / trials + z * z / (4 * trials * trials)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


def _released(cfg: ProtocolConfig, protocol: str, clients) -> np.ndarray:
    n = cfg.graph.n
    if protocol == "restricted":
        if clients is None:
            raise ValueError("restricted needs a client subset")
        return np.flatnonzero(_client_mask(n, clients))
    return np.arange(n)


def _destination_rows(protocol: str, cfg: ProtocolConfig, released: np.ndarray) -> np.ndarray:
    g = cfg.graph
    if protocol == "infinite":
        return np.tile(stationary_distribution(g), (released.size, 1))
    Q = walk_distributions(g, cfg.resolve_rounds())
    return Q[:, released].T.copy()


def exact_output_distribution(
    protocol: str, cfg: ProtocolConfig, data, *, clients=None, budget: int | None = None,
    backend: str | None = None,
) -> OutcomeDistribution:
    """Sum ``prod_u R[x_u, y_u] * q_u[l_u]`` over every ``(y, l)`` and group by partition.

    ``q_u`` is the ``T``-step walk distribution from ``u`` for ``rnd_wlk`` and
    ``restricted``, and the stationary distribution for ``infinite``.
    """
    if protocol not in EXACT_PROTOCOLS:
        raise ValueError(f"exact enumeration supports {', '.join(EXACT_PROTOCOLS)}, not {protocol!r}")
    x = _check_data(cfg, data)
    if protocol != "infinite" and cfg.rounds == "auto" and not validate_ergodic(cfg.graph).ergodic:
        raise NonErgodicError("rounds='auto' requires an ergodic graph")
    rel = _released(cfg, protocol, clients)
    n, k = cfg.graph.n, cfg.randomizer.output_size
    budget = enumeration_budget() if budget is None else budget
    size = (k * n) ** rel.size
    if size > budget:
        raise EnumerationBudgetExceeded(
            f"{size} weighted atoms exceed the budget of {budget}; use Monte Carlo instead"
        )
    sym = cfg.randomizer.table[x[rel]]
    dest = _destination_rows(protocol, cfg, rel)
    powers = partition_powers(n, k, max_count=rel.size)
    codes, weights = kernels.enumerate_assignments(sym, dest, powers, backend)
    uniq, inv = np.unique(codes, return_inverse=True)
    probs = np.bincount(inv, weights=weights, minlength=uniq.size)
    atoms = {
        decode_partition(c, n, k, max_count=rel.size): float(w)
        for c, w in zip(uniq.tolist(), probs.tolist())
        if w > 0
    }
    return OutcomeDistribution(atoms)


def monte_carlo_distribution(
    protocol: str, cfg: ProtocolConfig, data, trials: int, *, p=None, clients=None, workers: int = 1,
) -> OutcomeDistribution:
    batch = simulate(protocol, cfg, data, trials, p=p, clients=clients, workers=workers)
    n, k = cfg.graph.n, cfg.randomizer.output_size
    uniq, counts = np.unique(batch.codes(k), return_counts=True)
    atoms = {decode_partition(c, n, k): cnt / trials for c, cnt in zip(uniq.tolist(), counts.tolist())}
    return OutcomeDistribution(atoms, label="estimate", trials=trials)


# ---------------------------------------------------------------------------
# divergences
# ---------------------------------------------------------------------------


def _align(P, Q) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(P, OutcomeDistribution):
        P = P.atoms
    if isinstance(Q, OutcomeDistribution):
        Q = Q.atoms
    if isinstance(P, dict) or isinstance(Q, dict):
        if not (isinstance(P, dict) and isinstance(Q, dict)):
            raise TypeError("cannot mix keyed and positional distributions")
        keys = list(P) + [key for key in Q if key not in P]
        return (np.array([P.get(key, 0.0) for key in keys], dtype=float),
                np.array([Q.get(key, 0.0) for key in keys], dtype=float))
    p = np.asarray(P, dtype=float)
    q = np.asarray(Q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("positional distributions must have the same length")
    return p, q


def _hs(p, q, eps):
    return float(np.maximum(p - math.exp(eps) * q, 0.0).sum())


def hockey_stick(P, Q, eps: float) -> float:
    """``sum_z max(P(z) - e^eps Q(z), 0)``."""
    p, q = _align(P, Q)
    return min(1.0, max(0.0, _hs(p, q, eps)))


def tv_distance(P, Q) -> float:
    p, q = _align(P, Q)
    return min(1.0, 0.5 * float(np.abs(p - q).sum()))


def empirical_epsilon(P, Q, delta: float, tol: float = 1e-6) -> float:
    """Smallest eps (to ``tol``) with both hockey-stick directions at most ``delta``.

    ``delta == 0`` returns the largest absolute log-likelihood ratio exactly.
    Returns ``inf`` when mass on one-sided atoms already exceeds ``delta``.
    """
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    p, q = _align(P, Q)

    def f(e):
        return max(_hs(p, q, e), _hs(q, p, e))

    both = (p > 0) & (q > 0)
    one_sided = float(p[(p > 0) & (q == 0)].sum()), float(q[(q > 0) & (p == 0)].sum())
    top = float(np.abs(np.log(p[both]) - np.log(q[both])).max()) if both.any() else 0.0
    if delta == 0:
        return math.inf if max(one_sided) > 0 else top
    if f(0.0) <= delta:
        return 0.0
    if max(one_sided) > delta:
        return math.inf
    lo, hi = 0.0, top
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) <= delta:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AssignmentRatioReport:
    max_ratio: float
    min_ratio: float
    lower: float
    upper: float
    max_deviation: float
    deviation_bound: float
    ratio_ok: bool
    deviation_ok: bool

    @property
    def passed(self) -> bool:
        return self.ratio_ok and self.deviation_ok


def lemma1_ratio_check(g: Graph, T: int, eps0: float, *, budget: int | None = None,
                       backend: str | None = None) -> AssignmentRatioReport:
    """Extremes over all destination assignments ``l in [n]^n`` of
    ``prod_u q_u[l_u] / prod_u pi[l_u]``, against ``e^{+-eps0 / (2n)}``.

    Also reports ``max_u ||q_u - pi||_1`` against ``eps0 / n^4``.
    """
    n = g.n
    budget = enumeration_budget() if budget is None else budget
    if n**n > budget:
        raise EnumerationBudgetExceeded(f"{n}^{n} assignments exceed the budget of {budget}")
    Q = walk_distributions(g, T)
    pi = stationary_distribution(g)
    with np.errstate(divide="ignore"):
        log_ratio = np.log(Q) - np.log(pi)[:, None]
    hi, lo = kernels.log_ratio_extremes(log_ratio, backend)
    limit = eps0 / (2 * n)
    dev = float(np.abs(Q - pi[:, None]).sum(axis=0).max())
    return AssignmentRatioReport(
        max_ratio=math.exp(hi), min_ratio=math.exp(lo),
        lower=math.exp(-limit), upper=math.exp(limit),
        max_deviation=dev, deviation_bound=eps0 / n**4,
        ratio_ok=bool(-limit <= lo and hi <= limit), deviation_ok=dev <= eps0 / n**4,
    )


@dataclass(frozen=True)
class EventRatioReport:
    max_ratio: float
    min_ratio: float
    lower: float
    upper: float
    atoms: int
    unions: int

    @property
    def passed(self) -> bool:
        return self.lower <= self.min_ratio and self.max_ratio <= self.upper


def event_ratio_check(cfg: ProtocolConfig, data, eps0: float, *, unions: int = 100, seed: int = 0,
                      budget: int | None = None) -> EventRatioReport:
    """Ratio ``P_rnd_wlk(Z) / P_infinite(Z)`` over every single atom and ``unions`` random unions."""
    P = exact_output_distribution("rnd_wlk", cfg, data, budget=budget)
    Q = exact_output_distribution("infinite", cfg, data, budget=budget)
    keys = list(Q.atoms) + [k for k in P.atoms if k not in Q.atoms]
    p = np.array([P.prob(k) for k in keys])
    q = np.array([Q.prob(k) for k in keys])
    rng = np.random.default_rng(seed)
    masks = [np.eye(len(keys), dtype=bool)]
    if unions:
        picks = rng.random((unions, len(keys))) < 0.5
        picks[~picks.any(axis=1), 0] = True
        masks.append(picks)
    M = np.concatenate(masks)
    num, den = M @ p, M @ q
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / den, np.where(num > 0, np.inf, 1.0))
    limit = eps0 / (2 * cfg.graph.n)
    return EventRatioReport(
        max_ratio=float(ratio.max()), min_ratio=float(ratio.min()),
        lower=math.exp(-limit), upper=math.exp(limit), atoms=len(keys), unions=unions,
    )


@dataclass(frozen=True)
class MixingReport:
    gap: float
    rounds: int
    horizon: int
    max_excess: float  # max over (u, t) of ||p_t - pi||_1 - sqrt(n)(1-gap)^t
    worst: tuple[int, int]  # (start vertex, t) where the excess peaks
    deviation_at_rounds: float
    deviation_bound: float
    tol: float = 1e-12

    @property
    def bound_ok(self) -> bool:
        return self.max_excess <= self.tol

    @property
    def deviation_ok(self) -> bool:
        return self.deviation_at_rounds <= self.deviation_bound + self.tol

    @property
    def passed(self) -> bool:
        return self.bound_ok and self.deviation_ok


def mixing_check(g: Graph, eps0: float, horizon_factor: int = 3, tol: float = 1e-12) -> MixingReport:
    """Convergence bound for every start and every ``t <= horizon_factor * T``,
    plus the deviation at ``T = recommended_rounds``."""
    if not validate_ergodic(g).ergodic:
        raise NonErgodicError("mixing check needs an ergodic graph")
    gap = spectral_gap(g).gap
    T = recommended_rounds(gap, g.n, eps0)
    pi = stationary_distribution(g)
    P = transition_matrix(g)
    Q = np.eye(g.n)
    worst, where, dev_T = -math.inf, (0, 0), math.nan
    for t in range(horizon_factor * T + 1):
        dist = np.abs(Q - pi[:, None]).sum(axis=0)
        excess = dist - mixing_bound(g.n, gap, t)
        u = int(excess.argmax())
        if excess[u] > worst:
            worst, where = float(excess[u]), (u, t)
        if t == T:
            dev_T = float(dist.max())
        Q = P @ Q
    return MixingReport(gap, T, horizon_factor * T, worst, where, dev_T, eps0 / g.n**4, tol)


@dataclass(frozen=True)
class ConcentrationReport:
    violations: float  # fraction of draws outside [lower, upper]
    violation_count: int
    trials: int
    lower: float
    upper: float
    radius: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.violations <= self.bound


def sampling_concentration_check(p: float, n: int, delta: float, trials: int,
                                 rng: np.random.Generator) -> ConcentrationReport:
    """Draw ``trials`` participant counts ~ Binomial(n, p) and count escapes from the
    Bernstein interval ``[max(0, np - r), min(n, np + r)]``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    r = bernstein_radius(n * p * (1 - p), 1.0, delta)
    lower, upper = max(0.0, n * p - r), min(float(n), n * p + r)
    counts = rng.binomial(n, p, size=trials)
    bad = int(((counts < lower) | (counts > upper)).sum())
    return ConcentrationReport(bad / trials, bad, trials, lower, upper, r, delta)


@dataclass(frozen=True)
class DPCheckReport:
    emp_eps: float
    theory_eps: float | None
    theory_valid: bool
    eps0: float
    label: str
    pair: tuple = field(default=())

    @property
    def passed(self) -> bool:
        ok = self.emp_eps <= self.eps0 + 1e-9
        if self.theory_valid:
            ok = ok and self.emp_eps <= self.theory_eps + 1e-9
        return ok


def theory_bound(protocol: str, randomizer: Randomizer, n: int, delta: float, clients=None):
    eps0 = randomizer.claimed_eps0
    if not (0 < eps0 < math.inf):
        return None
    inp = BoundInputs(eps0=eps0, n=n, delta=delta, delta0=randomizer.claimed_delta0,
                      l=None if clients is None else len(set(clients)))
    if protocol == "infinite":
        return fmt_shuffle_bound(inp)
    if protocol == "restricted":
        return partial_shuffle_bound(inp)
    return netshuffle_bound(inp)


def empirical_dp_check(protocol: str, cfg: ProtocolConfig, data, data_prime, delta: float, *,
                       clients=None, budget: int | None = None, mc_trials: int | None = None
                       ) -> DPCheckReport:
    """Empirical epsilon of one neighbouring pair against the closed-form bound.

    Exact enumeration is used when it fits in the budget. Otherwise, if
    ``mc_trials`` is given, Monte Carlo frequencies are used and the result is
    labelled ``"estimate"``; without it the budget error propagates.
    """
    x, xp = _check_data(cfg, data), _check_data(cfg, data_prime)
    if int((x != xp).sum()) > 1:
        raise ValueError("datasets differ in more than one position")
    try:
        P = exact_output_distribution(protocol, cfg, x, clients=clients, budget=budget)
        Q = exact_output_distribution(protocol, cfg, xp, clients=clients, budget=budget)
    except EnumerationBudgetExceeded:
        if mc_trials is None:
            raise
        P = monte_carlo_distribution(protocol, cfg, x, mc_trials, clients=clients)
        Q = monte_carlo_distribution(protocol, cfg, xp, mc_trials, clients=clients)
    emp = empirical_epsilon(P, Q, delta)
    tb = theory_bound(protocol, cfg.randomizer, cfg.graph.n, delta, clients)
    return DPCheckReport(
        emp_eps=emp,
        theory_eps=tb.eps if tb is not None else None,
        theory_valid=bool(tb is not None and tb.valid),
        eps0=cfg.randomizer.claimed_eps0,
        label=P.label,
        pair=(tuple(x.tolist()), tuple(xp.tolist())),
    )


@dataclass(frozen=True)
class LDPReport:
    observed: float
    claimed: float

    @property
    def passed(self) -> bool:
        return self.observed <= self.claimed + 1e-12


def ldp_check(r: Randomizer) -> LDPReport:
    return LDPReport(verify_ldp(r), r.claimed_eps0)
