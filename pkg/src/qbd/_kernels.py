"""Hot loops with a numba backend and a pure-numpy fallback.

Set ``QBD_DISABLE_NUMBA=1`` to force the numpy implementations. Both
backends draw random numbers from the same counter-based generator (a
SplitMix64 stream keyed by seed and replication index) and therefore
produce identical results.
"""
from __future__ import annotations

import math
import os

import numpy as np

__all__ = [
    "BACKEND",
    "NUMBA_AVAILABLE",
    "get_kernels",
    "uniformize",
    "gillespie_transient",
    "gillespie_occupancy",
    "stream_key",
    "stream_uniform",
]

_DISABLED = os.environ.get("QBD_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("disabled by QBD_DISABLE_NUMBA")
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f


BACKEND = "numba" if NUMBA_AVAILABLE else "numpy"

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / 9007199254740992.0


# --- scalar reference generator (plain Python ints) -----------------------

def _mix64_int(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def stream_key(seed: int, rep: int) -> int:
    """64-bit key of replication ``rep`` under ``seed``."""
    return _mix64_int(_mix64_int(seed) ^ (((rep + 1) * _GOLDEN) & _MASK))


def stream_uniform(key: int, counter: int) -> float:
    """Draw number ``counter`` of the stream ``key`` as a float in (0, 1)."""
    x = _mix64_int(key + (counter + 1) * _GOLDEN)
    return ((x >> 11) + 0.5) * _INV53


# --- numba kernels --------------------------------------------------------

_U_GOLDEN = np.uint64(_GOLDEN)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_U1 = np.uint64(1)


@njit(cache=True, nogil=True)
def _nb_mix64(z):
    z = (z ^ (z >> _U30)) * _U_M1
    z = (z ^ (z >> _U27)) * _U_M2
    return z ^ (z >> _U31)


@njit(cache=True, nogil=True)
def _nb_key(seed, rep):
    return _nb_mix64(_nb_mix64(seed) ^ ((np.uint64(rep) + _U1) * _U_GOLDEN))


@njit(cache=True, nogil=True)
def _nb_uniform(key, counter):
    x = _nb_mix64(key + (np.uint64(counter) + _U1) * _U_GOLDEN)
    return (np.float64(x >> _U11) + 0.5) * _INV53


@njit(cache=True, nogil=True)
def _nb_uniformize(indptr, indices, data, p0, weights, kmin):
    n = p0.shape[0]
    nt, nk = weights.shape
    out = np.zeros((nt, n))
    v = p0.copy()
    w = np.empty(n)
    for k in range(kmin + nk):
        if k >= kmin:
            kk = k - kmin
            for a in range(nt):
                wk = weights[a, kk]
                if wk != 0.0:
                    for i in range(n):
                        out[a, i] += wk * v[i]
        if k == kmin + nk - 1:
            break
        for i in range(n):
            acc = 0.0
            for q in range(indptr[i], indptr[i + 1]):
                acc += data[q] * v[indices[q]]
            w[i] = acc
        for i in range(n):
            v[i] = w[i]
    return out


@njit(cache=True, nogil=True)
def _nb_pick(row, u):
    d = row.shape[0]
    for j in range(d - 1):
        if u < row[j]:
            return j
    return d - 1


@njit(cache=True, nogil=True)
def _nb_transient(N, d, lam, mu, xi, ccum, l0, times, seed, rep0, nrep):
    nt = times.shape[0]
    out = np.empty((nrep, nt), dtype=np.int64)
    useed = np.uint64(seed)
    for i in range(nrep):
        key = _nb_key(useed, rep0 + i)
        c = 0
        k = 0
        j = l0 - 1
        t = 0.0
        ti = 0
        while True:
            if k == 0:
                up = lam * N
                down = 0.0
                rate = up
            else:
                up = lam * (N - k) if k < N else 0.0
                down = mu * (N + k)
                rate = up + down + xi
            u1 = _nb_uniform(key, c)
            c += 1
            tnext = t - np.log(u1) / rate
            while ti < nt and times[ti] < tnext:
                out[i, ti] = k * d + j
                ti += 1
            if ti == nt:
                break
            u2 = _nb_uniform(key, c)
            c += 1
            if k == 0:
                j = _nb_pick(ccum[j], u2)
                k = 1
            else:
                x = u2 * rate
                if x < up:
                    k += 1
                elif x < up + down:
                    k -= 1
                else:
                    k = 0
            t = tnext
    return out


@njit(cache=True, nogil=True)
def _nb_occupancy(N, d, lam, mu, xi, ccum, l0, burn_in, horizon, seed, rep0, nrep):
    ns = d * (N + 1)
    out = np.zeros((nrep, ns))
    useed = np.uint64(seed)
    span = horizon - burn_in
    for i in range(nrep):
        key = _nb_key(useed, rep0 + i)
        c = 0
        k = 0
        j = l0 - 1
        t = 0.0
        while t < horizon:
            if k == 0:
                up = lam * N
                down = 0.0
                rate = up
            else:
                up = lam * (N - k) if k < N else 0.0
                down = mu * (N + k)
                rate = up + down + xi
            u1 = _nb_uniform(key, c)
            c += 1
            tnext = t - np.log(u1) / rate
            a = t if t > burn_in else burn_in
            b = tnext if tnext < horizon else horizon
            if b > a:
                out[i, k * d + j] += (b - a) / span
            if tnext >= horizon:
                break
            u2 = _nb_uniform(key, c)
            c += 1
            if k == 0:
                j = _nb_pick(ccum[j], u2)
                k = 1
            else:
                x = u2 * rate
                if x < up:
                    k += 1
                elif x < up + down:
                    k -= 1
                else:
                    k = 0
            t = tnext
    return out


# --- numpy fallbacks ------------------------------------------------------

def _libm_log(u):
    # numpy's vectorized log may differ from libm (which numba calls) by an ulp
    return np.fromiter(map(math.log, u.tolist()), dtype=np.float64, count=u.size)


def _np_mix64(z):
    z = (z ^ (z >> _U30)) * _U_M1
    z = (z ^ (z >> _U27)) * _U_M2
    return z ^ (z >> _U31)


def _np_keys(seed, rep0, nrep):
    reps = np.arange(rep0, rep0 + nrep, dtype=np.uint64)
    s = _np_mix64(np.full(nrep, seed, dtype=np.uint64))
    return _np_mix64(s ^ ((reps + _U1) * _U_GOLDEN))


def _np_uniform(keys, counters):
    x = _np_mix64(keys + (counters.astype(np.uint64) + _U1) * _U_GOLDEN)
    return ((x >> _U11).astype(np.float64) + 0.5) * _INV53


def _np_uniformize(indptr, indices, data, p0, weights, kmin):
    import scipy.sparse as sp

    n = p0.shape[0]
    PT = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    nt, nk = weights.shape
    out = np.zeros((nt, n))
    v = p0.copy()
    for k in range(kmin + nk):
        if k >= kmin:
            out += np.outer(weights[:, k - kmin], v)
        if k < kmin + nk - 1:
            v = PT @ v
    return out


def _np_rates(k, N, lam, mu, xi):
    at0 = k == 0
    up = np.where(at0, lam * N, np.where(k < N, lam * (N - k), 0.0))
    down = np.where(at0, 0.0, mu * (N + k))
    rate = up + down + np.where(at0, 0.0, xi)
    return up, down, rate


def _np_step(k, j, u2, up, down, rate, ccum):
    at0 = k == 0
    x = u2 * rate
    newk = np.where(x < up, k + 1, np.where(x < up + down, k - 1, 0))
    newk = np.where(at0, 1, newk)
    if at0.any():
        rows = ccum[j[at0]]
        cnt = (u2[at0][:, None] >= rows[:, :-1]).sum(axis=1)
        j = j.copy()
        j[at0] = cnt
    return newk, j


def _np_transient(N, d, lam, mu, xi, ccum, l0, times, seed, rep0, nrep):
    nt = times.shape[0]
    out = np.empty((nrep, nt), dtype=np.int64)
    keys = _np_keys(seed, rep0, nrep)
    c = np.zeros(nrep, dtype=np.int64)
    k = np.zeros(nrep, dtype=np.int64)
    j = np.full(nrep, l0 - 1, dtype=np.int64)
    t = np.zeros(nrep)
    ti = np.zeros(nrep, dtype=np.int64)
    act = np.arange(nrep)
    while act.size:
        kk, jj = k[act], j[act]
        up, down, rate = _np_rates(kk, N, lam, mu, xi)
        u1 = _np_uniform(keys[act], c[act])
        c[act] += 1
        tnext = t[act] - _libm_log(u1) / rate
        state = kk * d + jj
        # record every requested time passed during this holding interval
        while True:
            pending = ti[act] < nt
            tcur = times[np.minimum(ti[act], nt - 1)]
            hit = pending & (tcur < tnext)
            if not hit.any():
                break
            idx = act[hit]
            out[idx, ti[idx]] = state[hit]
            ti[idx] += 1
        alive = ti[act] < nt
        act, kk, jj = act[alive], kk[alive], jj[alive]
        up, down, rate, tnext = up[alive], down[alive], rate[alive], tnext[alive]
        if not act.size:
            break
        u2 = _np_uniform(keys[act], c[act])
        c[act] += 1
        k[act], j[act] = _np_step(kk, jj, u2, up, down, rate, ccum)
        t[act] = tnext
    return out


def _np_occupancy(N, d, lam, mu, xi, ccum, l0, burn_in, horizon, seed, rep0, nrep):
    ns = d * (N + 1)
    out = np.zeros((nrep, ns))
    keys = _np_keys(seed, rep0, nrep)
    c = np.zeros(nrep, dtype=np.int64)
    k = np.zeros(nrep, dtype=np.int64)
    j = np.full(nrep, l0 - 1, dtype=np.int64)
    t = np.zeros(nrep)
    span = horizon - burn_in
    act = np.arange(nrep)
    while act.size:
        kk, jj = k[act], j[act]
        up, down, rate = _np_rates(kk, N, lam, mu, xi)
        u1 = _np_uniform(keys[act], c[act])
        c[act] += 1
        tcur = t[act]
        tnext = tcur - _libm_log(u1) / rate
        a = np.maximum(tcur, burn_in)
        b = np.minimum(tnext, horizon)
        ok = b > a
        np.add.at(out, (act[ok], (kk * d + jj)[ok]), (b - a)[ok] / span)
        alive = tnext < horizon
        act, kk, jj = act[alive], kk[alive], jj[alive]
        up, down, rate, tnext = up[alive], down[alive], rate[alive], tnext[alive]
        if not act.size:
            break
        u2 = _np_uniform(keys[act], c[act])
        c[act] += 1
        k[act], j[act] = _np_step(kk, jj, u2, up, down, rate, ccum)
        t[act] = tnext
    return out


_NUMPY = {
    "uniformize": _np_uniformize,
    "transient": _np_transient,
    "occupancy": _np_occupancy,
}
_NUMBA = {
    "uniformize": _nb_uniformize,
    "transient": _nb_transient,
    "occupancy": _nb_occupancy,
}


def get_kernels(backend: str | None = None) -> dict:
    """Kernel table for ``"numba"``, ``"numpy"`` or the active backend."""
    backend = backend or BACKEND
    if backend == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError("numba backend unavailable")
        return _NUMBA
    if backend == "numpy":
        return _NUMPY
    raise ValueError(f"unknown backend {backend!r}")


def uniformize(indptr, indices, data, p0, weights, kmin, backend=None):
    return get_kernels(backend)["uniformize"](indptr, indices, data, p0, weights, kmin)


def gillespie_transient(N, d, lam, mu, xi, ccum, l0, times, seed, rep0, nrep, backend=None):
    return get_kernels(backend)["transient"](N, d, lam, mu, xi, ccum, l0, times, seed, rep0, nrep)


def gillespie_occupancy(N, d, lam, mu, xi, ccum, l0, burn_in, horizon, seed, rep0, nrep, backend=None):
    return get_kernels(backend)["occupancy"](N, d, lam, mu, xi, ccum, l0, burn_in, horizon, seed, rep0, nrep)
