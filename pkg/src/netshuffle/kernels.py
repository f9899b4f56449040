"""Hot inner loops, each with a numba and a pure-numpy implementation.

Both implementations consume the same pre-drawn uniforms and perform the same
floating-point operations in the same order, so they return identical arrays.
The public functions dispatch on :data:`netshuffle._accel.USE_NUMBA` at call
time; pass ``backend="numpy"`` or ``backend="numba"`` to force one.
"""

from __future__ import annotations

import numpy as np

from netshuffle import _accel
from netshuffle._accel import njit

_CHUNK = 1 << 18


def _pick(backend: str | None) -> str:
    if backend is None:
        return "numba" if _accel.USE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not _accel.HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend


# ---------------------------------------------------------------------------
# random walks
# ---------------------------------------------------------------------------


@njit
def _walk_numba(indptr, indices, starts, uniforms):
    m, steps = uniforms.shape
    out = np.empty(m, dtype=np.int64)
    for i in range(m):
        v = starts[i]
        for t in range(steps):
            lo = indptr[v]
            deg = indptr[v + 1] - lo
            j = np.int64(uniforms[i, t] * deg)
            if j >= deg:
                j = deg - 1
            v = indices[lo + j]
        out[i] = v
    return out


def _walk_numpy(indptr, indices, starts, uniforms):
    v = np.array(starts, dtype=np.int64, copy=True)
    for t in range(uniforms.shape[1]):
        lo = indptr[v]
        deg = indptr[v + 1] - lo
        j = np.minimum((uniforms[:, t] * deg).astype(np.int64), deg - 1)
        v = indices[lo + j]
    return v


def walk_destinations(indptr, indices, starts, uniforms, backend=None):
    """End vertex of one walk per row of ``uniforms``.

    Row ``i`` starts at ``starts[i]`` and takes ``uniforms.shape[1]`` steps; step
    ``t`` moves to neighbour ``floor(u * deg)`` in CSR order.
    """
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    uniforms = np.ascontiguousarray(uniforms, dtype=np.float64)
    if uniforms.ndim != 2 or uniforms.shape[0] != starts.shape[0]:
        raise ValueError("uniforms must have shape (len(starts), steps)")
    if _pick(backend) == "numba":
        return _walk_numba(indptr, indices, starts, uniforms)
    return _walk_numpy(indptr, indices, starts, uniforms)


# ---------------------------------------------------------------------------
# categorical sampling by inverse CDF
# ---------------------------------------------------------------------------


@njit
def _icdf_numba(cdf, rows, uniforms):
    m = rows.shape[0]
    k = cdf.shape[1]
    out = np.empty(m, dtype=np.int64)
    for i in range(m):
        r = rows[i]
        u = uniforms[i]
        j = 0
        while j < k - 1 and u >= cdf[r, j]:
            j += 1
        out[i] = j
    return out


def _icdf_numpy(cdf, rows, uniforms):
    hits = (uniforms[:, None] >= cdf[rows]).sum(axis=1)
    return np.minimum(hits, cdf.shape[1] - 1).astype(np.int64)


def inverse_cdf(cdf, rows, uniforms, backend=None):
    """Sample column indices: ``out[i]`` is drawn from row ``rows[i]`` of ``cdf``."""
    cdf = np.ascontiguousarray(cdf, dtype=np.float64)
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    uniforms = np.ascontiguousarray(uniforms, dtype=np.float64)
    if _pick(backend) == "numba":
        return _icdf_numba(cdf, rows, uniforms)
    return _icdf_numpy(cdf, rows, uniforms)


# ---------------------------------------------------------------------------
# exact enumeration of (output symbol, destination) assignments
# ---------------------------------------------------------------------------


@njit
def _digits(idx, radix, r):
    out = np.empty(r, dtype=np.int64)
    for j in range(r):
        out[j] = idx % radix
        idx //= radix
    return out


@njit
def _enumerate_numba(sym_probs, dest_probs, powers, start, stop):
    # odometer over base-(k n) digits, client 0 least significant; the product
    # is recomputed in client order so it matches the numpy path bit for bit
    r, k = sym_probs.shape
    n = dest_probs.shape[1]
    radix = k * n
    size = stop - start
    codes = np.empty(size, dtype=np.int64)
    weights = np.empty(size, dtype=np.float64)
    digit = _digits(start, radix, r)
    for i in range(size):
        w = 1.0
        code = np.int64(0)
        for j in range(r):
            d = digit[j]
            y = d // n
            dst = d - y * n
            w *= sym_probs[j, y] * dest_probs[j, dst]
            code += powers[dst * k + y]
        codes[i] = code
        weights[i] = w
        j = 0
        while j < r:
            digit[j] += 1
            if digit[j] < radix:
                break
            digit[j] = 0
            j += 1
    return codes, weights


def _enumerate_numpy(sym_probs, dest_probs, powers, start, stop):
    r, k = sym_probs.shape
    n = dest_probs.shape[1]
    radix = k * n
    rem = np.arange(start, stop, dtype=np.int64)
    w = np.ones(rem.shape[0], dtype=np.float64)
    code = np.zeros(rem.shape[0], dtype=np.int64)
    for j in range(r):
        rem, d = np.divmod(rem, radix)
        y, dst = np.divmod(d, n)
        w *= sym_probs[j, y] * dest_probs[j, dst]
        code += powers[dst * k + y]
    return code, w


def enumerate_assignments(sym_probs, dest_probs, powers, backend=None):
    """Weight and partition code of every joint (symbol, destination) assignment.

    ``sym_probs[j]`` is the output distribution of releasing client ``j`` and
    ``dest_probs[j]`` the distribution of where its value ends up. Returns
    ``(codes, weights)`` with one entry per assignment, ``(k * n) ** r`` in all.
    A partition code is ``sum_j powers[dest_j * k + y_j]``.
    """
    sym_probs = np.ascontiguousarray(sym_probs, dtype=np.float64)
    dest_probs = np.ascontiguousarray(dest_probs, dtype=np.float64)
    powers = np.ascontiguousarray(powers, dtype=np.int64)
    r, k = sym_probs.shape
    total = (k * dest_probs.shape[1]) ** r
    fn = _enumerate_numba if _pick(backend) == "numba" else _enumerate_numpy
    codes, weights = [], []
    for lo in range(0, total, _CHUNK):
        c, w = fn(sym_probs, dest_probs, powers, lo, min(total, lo + _CHUNK))
        codes.append(c)
        weights.append(w)
    if not codes:
        return np.zeros(1, dtype=np.int64), np.ones(1)
    return np.concatenate(codes), np.concatenate(weights)


# ---------------------------------------------------------------------------
# extremes of the per-assignment log ratio
# ---------------------------------------------------------------------------


@njit
def _log_ratio_numba(log_ratio, start, stop):
    n, r = log_ratio.shape
    hi = -np.inf
    lo = np.inf
    digit = _digits(start, n, r)
    for _ in range(stop - start):
        s = 0.0
        for u in range(r):
            s += log_ratio[digit[u], u]
        if s > hi:
            hi = s
        if s < lo:
            lo = s
        u = 0
        while u < r:
            digit[u] += 1
            if digit[u] < n:
                break
            digit[u] = 0
            u += 1
    return hi, lo


def _log_ratio_numpy(log_ratio, start, stop):
    n, r = log_ratio.shape
    rem = np.arange(start, stop, dtype=np.int64)
    s = np.zeros(rem.shape[0])
    for u in range(r):
        rem, d = np.divmod(rem, n)
        s += log_ratio[d, u]
    return float(s.max()), float(s.min())


def log_ratio_extremes(log_ratio, backend=None):
    """Max and min over all ``l in [n]^r`` of ``sum_u log_ratio[l_u, u]``."""
    log_ratio = np.ascontiguousarray(log_ratio, dtype=np.float64)
    n, r = log_ratio.shape
    total = n**r
    fn = _log_ratio_numba if _pick(backend) == "numba" else _log_ratio_numpy
    hi, lo = -np.inf, np.inf
    for a in range(0, total, _CHUNK):
        h, l_ = fn(log_ratio, a, min(total, a + _CHUNK))
        hi = max(hi, h)
        lo = min(lo, l_)
    return float(hi), float(lo)
