import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from netshuffle.bounds import (
    BoundInputs,
    bernstein_radius,
    compute,
    delta_prime,
    fmt_shuffle_bound,
    lambda_p,
    liew_topology_metric,
    netshuffle_bound,
    partial_shuffle_bound,
    smpl_wlk_bound,
    subsample_wor,
)
from netshuffle.graph import GraphError, build_graph, complete_graph, cycle_graph, star_graph

mp.mp.dps = 50


def oracle_shuffle(eps0, n, delta, scale=1):
    e0 = mp.e ** mp.mpf(eps0)
    frac = (e0 - 1) / (e0 + 1)
    inner = mp.sqrt(scale) * 8 * mp.sqrt(e0 * mp.log(4 / mp.mpf(delta))) / mp.sqrt(n) + 8 * e0 / n
    return mp.log(1 + frac * inner)


def oracle_lambda(p, n, delta):
    lg = mp.log(2 / mp.mpf(delta))
    p = mp.mpf(p)
    return mp.sqrt(2 * p * (1 - p) / n * lg) + 2 * lg / (3 * n)


def inp(**kw):
    base = dict(eps0=1.0, n=10_000, delta=1e-6)
    base.update(kw)
    return BoundInputs(**base)


def test_fmt_reference_value():
    b = fmt_shuffle_bound(inp())
    assert b.valid
    assert abs(b.eps - 0.214021) <= 1e-5
    assert abs(b.eps - float(oracle_shuffle(1, 10_000, 1e-6))) <= 1e-13
    assert b.delta == 1e-6


def test_fmt_invalid_small_n():
    b = fmt_shuffle_bound(inp(n=100))
    assert not b.valid and b.eps is None and b.delta is None
    assert "ln(n / (16 ln(2/delta)))" in b.validity_condition


def test_netshuffle_adds_penalty():
    f, ns = fmt_shuffle_bound(inp()), netshuffle_bound(inp())
    assert ns.eps - f.eps == pytest.approx(1e-4, abs=1e-15)
    assert ns.delta == pytest.approx(math.exp(5e-5) * 1e-6, rel=1e-14)
    assert ns.notes["shuffle_eps"] == f.eps


def test_delta_prime_examples():
    assert delta_prime(0.3, eps0=1, n=10, delta=1e-6, delta0=0) == 1e-6
    assert delta_prime(0.0, eps0=200, n=10, delta=0.0, delta0=1e-9) == pytest.approx(2e-8, rel=1e-12)
    got = delta_prime(math.log(2), eps0=math.log(2), n=1, delta=1e-9, delta0=1e-9)
    assert got == pytest.approx(4.75e-9, rel=1e-12)
    with pytest.raises(ValueError):
        delta_prime(-0.1, eps0=1, n=1, delta=0, delta0=0)


def test_delta_prime_uses_shuffle_eps_with_delta0():
    b = netshuffle_bound(inp(delta0=1e-10))
    shuffle = b.notes["shuffle_eps"]
    expected = math.exp(1 / 20_000) * delta_prime(shuffle, eps0=1, n=10_000, delta=1e-6, delta0=1e-10)
    assert b.delta == pytest.approx(expected, rel=1e-14)
    assert b.notes["delta_with_total_eps"] > b.delta


def test_subsample_wor_examples():
    b = subsample_wor(math.log(2), 1e-6, 50, 100)
    assert abs(b.eps - math.log(1.5)) <= 1e-12
    assert b.delta == pytest.approx(5e-7)
    same = subsample_wor(0.37, 1e-5, 40, 40)
    assert same.eps == pytest.approx(0.37, abs=1e-15) and same.delta == 1e-5
    zero = subsample_wor(2.0, 1e-5, 0, 40)
    assert zero.eps == 0 and zero.delta == 0
    with pytest.raises(ValueError):
        subsample_wor(1.0, 1e-6, 101, 100)


def test_lambda_examples():
    assert abs(lambda_p(0.1, 10_000, 1e-6) - 0.017127) <= 1e-5
    assert lambda_p(0.1, 10_000, 1e-6) == pytest.approx(float(oracle_lambda(0.1, 10_000, 1e-6)), rel=1e-13)
    edge = 2 * math.log(2e6) / 30_000
    assert lambda_p(0.0, 10_000, 1e-6) == pytest.approx(edge, rel=1e-14)
    assert lambda_p(1.0, 10_000, 1e-6) == pytest.approx(edge, rel=1e-14)


# dyadic p keeps 1 - p exact, so the two calls see mirror-image inputs
@given(st.integers(0, 2**20).map(lambda k: k / 2**20), st.integers(1, 10**7), st.floats(1e-12, 0.5))
def test_lambda_symmetric(p, n, delta):
    assert lambda_p(p, n, delta) == pytest.approx(lambda_p(1 - p, n, delta), rel=1e-12)


def test_lambda_vanishes():
    vals = [lambda_p(0.3, 10**k, 1e-6) for k in range(2, 12)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-4


def test_smpl_wlk_reference_value():
    b = smpl_wlk_bound(inp(p=0.1))
    assert b.valid
    assert abs(b.eps - 0.0792) <= 1e-3
    lam = oracle_lambda(0.1, 10_000, 1e-6)
    frac = mp.mpf("0.1") + lam
    oracle = 1 / mp.mpf(10_000) + oracle_shuffle(1, 10_000, 1e-6, scale=frac)
    assert b.eps == pytest.approx(float(oracle), abs=1e-13)
    oracle_delta = mp.mpf(1e-6) + frac * mp.e ** (mp.mpf(1) / 20_000) * mp.mpf(1e-6)
    assert b.delta == pytest.approx(float(oracle_delta), rel=1e-12)
    assert b.delta == pytest.approx(1.1171e-6, rel=1e-4)
    assert b.eps < fmt_shuffle_bound(inp()).eps


def test_smpl_wlk_p_one_within_lambda_inflation():
    full = smpl_wlk_bound(inp(p=1.0))
    ns = netshuffle_bound(inp())
    assert full.eps > ns.eps
    inflated = 1e-4 + _shuffle_scaled(1 + lambda_p(1.0, 10_000, 1e-6))
    assert full.eps == pytest.approx(inflated, rel=1e-12)


def _shuffle_scaled(scale):
    return float(oracle_shuffle(1, 10_000, 1e-6, scale=scale))


def test_smpl_wlk_invalid_small_p():
    b = smpl_wlk_bound(inp(n=1000, p=0.01))
    assert not b.valid and b.eps is None
    assert "lambda_p" in b.notes


def test_smpl_wlk_monotone_in_p_on_grid():
    grid = np.round(np.arange(0.5, 1.0 + 1e-9, 0.01), 2)
    eps = [smpl_wlk_bound(inp(p=float(p))).eps for p in grid]
    assert all(a < b for a, b in zip(eps, eps[1:]))


def test_smpl_wlk_dip_next_to_one():
    # sqrt(k/n + lambda(p)) falls for p within ~7e-4 of 1 because lambda(p)
    # drops faster than p grows there; pinned so the behaviour is visible
    a = smpl_wlk_bound(inp(p=0.9999)).eps
    b = smpl_wlk_bound(inp(p=1.0)).eps
    assert b < a


def test_partial_examples():
    b = partial_shuffle_bound(inp(l=1000))
    assert b.valid and b.eps == pytest.approx(0.5663, abs=5e-5)
    oracle = 1 / mp.mpf(10_000) + oracle_shuffle(1, 1000, 1e-6)
    assert b.eps == pytest.approx(float(oracle), abs=1e-13)
    assert not partial_shuffle_bound(inp(l=100)).valid
    full = partial_shuffle_bound(inp(l=10_000, delta0=1e-12))
    ns = netshuffle_bound(inp(delta0=1e-12))
    assert (full.eps, full.delta) == (ns.eps, ns.delta)


def test_liew_metric_examples():
    for n in (3, 7, 20):
        assert liew_topology_metric(complete_graph(n), math.inf) == pytest.approx(math.sqrt(1 / n))
    with pytest.warns(RuntimeWarning):
        star = liew_topology_metric(star_graph(6), math.inf)
    assert star == pytest.approx(math.sqrt(0.25 + 5 / (4 * 25)))
    with pytest.warns(RuntimeWarning):
        big = liew_topology_metric(star_graph(2000), math.inf)
    assert big == pytest.approx(0.5, abs=1e-3)
    g = build_graph(4, [(0, 1), (1, 2), (0, 2), (0, 3)])
    pi = np.array([3, 2, 2, 1]) / 8
    assert liew_topology_metric(g, 0) == pytest.approx(math.sqrt(pi @ pi + 1))
    with pytest.raises(GraphError):
        liew_topology_metric(build_graph(4, [(0, 1), (2, 3)]), 3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        liew_topology_metric(complete_graph(4), 5)


def test_bernstein_examples():
    assert bernstein_radius(25.0, 1.0, 0.05) == pytest.approx(16.040268, abs=1e-6)
    assert bernstein_radius(0.0, 3.0, 0.1) == pytest.approx(2 * math.log(20), rel=1e-14)
    r = [bernstein_radius(4.0, 1.0, b) for b in (0.01, 0.05, 0.2, 0.6)]
    assert all(a > b for a, b in zip(r, r[1:]))


def test_compute_dispatch():
    assert compute("fmt", eps0=1, n=10_000, delta=1e-6).eps == fmt_shuffle_bound(inp()).eps
    assert compute("subsample_wor", eps=math.log(2), n=100, l=50, delta=1e-6).eps == pytest.approx(math.log(1.5))
    assert compute("liew_metric", graph=complete_graph(4)).eps == pytest.approx(0.5)
    with pytest.raises(ValueError):
        compute("renyi", eps0=1, n=10, delta=0.1)
    with pytest.raises(ValueError):
        compute("smpl_wlk", eps0=1, n=10_000, delta=1e-6)


def test_inputs_validation():
    for bad in (dict(eps0=0), dict(n=1), dict(delta=0), dict(delta=1.5), dict(p=1.2), dict(l=20_000)):
        with pytest.raises(ValueError):
            inp(**bad)


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

EPS0 = [0.05, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0]
NS = [10**3, 3 * 10**3, 10**4, 3 * 10**4, 10**5, 10**6]
DELTAS = [1e-9, 1e-7, 1e-6, 1e-4, 1e-2]


def _eps(model, **kw):
    extra = {"p": 0.3} if model == "smpl_wlk" else {"l": kw["n"] // 2} if model == "partial" else {}
    b = compute(model, delta0=0.0, **kw, **extra)
    return b.eps if b.valid else None


@pytest.mark.parametrize("model", ["fmt", "netshuffle", "smpl_wlk", "partial"])
def test_monotone_grids(model):
    for n in NS:
        for d in DELTAS:
            vals = [_eps(model, eps0=e, n=n, delta=d) for e in EPS0]
            vals = [v for v in vals if v is not None]
            assert all(a <= b for a, b in zip(vals, vals[1:]))
    for e in EPS0:
        for d in DELTAS:
            vals = [v for v in (_eps(model, eps0=e, n=n, delta=d) for n in NS) if v is not None]
            assert all(a >= b for a, b in zip(vals, vals[1:]))
        for n in NS:
            vals = [v for v in (_eps(model, eps0=e, n=n, delta=d) for d in DELTAS) if v is not None]
            assert all(a >= b for a, b in zip(vals, vals[1:]))


@given(st.floats(0.01, 6), st.integers(2, 10**7), st.floats(1e-12, 1), st.floats(0, 1e-6),
       st.floats(0, 1), st.floats(0, 1))
def test_never_nan_or_inf(eps0, n, delta, delta0, p, frac):
    kw = dict(eps0=eps0, n=n, delta=delta, delta0=delta0)
    models = [("fmt", {}), ("netshuffle", {}), ("partial", {"l": int(frac * n)})]
    if delta < 1:
        models.append(("smpl_wlk", {"p": p}))
    for model, extra in models:
        b = compute(model, **kw, **extra)
        if b.valid:
            assert math.isfinite(b.eps) and math.isfinite(b.delta)
            assert b.eps > 0 and b.delta >= delta
        else:
            assert b.eps is None and b.delta is None


@given(st.floats(0.01, 3), st.integers(10**4, 10**7), st.floats(1e-10, 1e-3), st.floats(0.01, 0.99))
def test_amplification_ordering(eps0, n, delta, p):
    f = fmt_shuffle_bound(BoundInputs(eps0, n, delta))
    ns = netshuffle_bound(BoundInputs(eps0, n, delta))
    s = smpl_wlk_bound(BoundInputs(eps0, n, delta, p=p))
    if f.valid:
        assert ns.eps == f.eps + eps0 / n
    if s.valid and ns.valid:
        assert s.eps < ns.eps


@given(st.floats(0, 5), st.floats(0, 1), st.integers(1, 1000))
def test_subsample_identity_when_full(eps, delta, n):
    b = subsample_wor(eps, delta, n, n)
    assert b.eps == pytest.approx(eps, rel=1e-12, abs=1e-15) and b.delta == delta
