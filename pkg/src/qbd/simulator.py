"""Event-driven Monte Carlo for the QBD with catastrophes.

Replication ``r`` draws from its own counter-based stream keyed by
``(seed, r)``, so estimates do not depend on how replications are split
across workers. The heavy loops live in :mod:`qbd._kernels`;
:func:`simulate_path` is a plain-Python walk over the same stream and
serves as a readable reference for them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from ._parallel import ordered_map
from .diffusion import scaling_map
from .errors import DomainError
from .model import ModelParams, validate

__all__ = [
    "SimConfig",
    "SimEstimate",
    "Event",
    "simulate_path",
    "check_path",
    "TransientEstimate",
    "estimate_transient",
    "StationaryEstimate",
    "estimate_stationary",
    "default_burn_in",
    "ScaledSample",
    "scaled_sample",
]

CHUNK = 8192


def default_burn_in(params: ModelParams) -> float:
    """``10 / min(lambda, mu, xi)``, with ``lambda`` standing in for ``xi = 0``."""
    return 10.0 / min(params.lam, params.mu, params.xi if params.xi > 0 else params.lam)


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    Parameters
    ----------
    replications : int
        Number of independent replications.
    horizon : float
        Simulated time span per replication.
    seed : int
        64-bit seed.
    times : sequence of float, optional
        Observation times for transient estimates (each ``<= horizon``).
    burn_in : float, optional
        Start of the averaging window for occupancy estimates.
    """

    replications: int
    horizon: float
    seed: int = 0
    times: tuple = ()
    burn_in: float | None = None

    def __post_init__(self):
        if int(self.replications) < 1:
            raise DomainError("replications must be >= 1")
        if not self.horizon > 0:
            raise DomainError("horizon must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must fit in 64 bits")
        if self.burn_in is not None and not 0 <= self.burn_in < self.horizon:
            raise DomainError("burn_in must lie in [0, horizon)")
        ts = tuple(float(t) for t in self.times)
        if any(not 0 <= t <= self.horizon for t in ts):
            raise DomainError("observation times must lie in [0, horizon]")
        object.__setattr__(self, "times", ts)


@dataclass(frozen=True)
class SimEstimate:
    point: float
    stderr: float
    n: int

    def within(self, value: float, k: float = 4.0) -> bool:
        """Whether ``value`` lies within ``k`` standard errors of the estimate."""
        if self.stderr == 0:
            return abs(self.point - value) <= 1e-12
        return abs(self.point - value) <= k * self.stderr


@dataclass(frozen=True)
class Event:
    """A jump at ``time`` into state ``(k, j)``; ``j`` is 1-based."""

    time: float
    k: int
    j: int


def _ccum(params):
    return np.ascontiguousarray(np.cumsum(params.C.c, axis=1))


def simulate_path(params: ModelParams, horizon: float, seed: int = 0, rep: int = 0) -> list[Event]:
    """One path on ``[0, horizon]`` as a list of jumps, starting with the initial state.

    Holding time and move are drawn from consecutive uniforms of stream
    ``(seed, rep)``: an exponential at the total rate, then the move with
    probability proportional to its rate. This matches the replication of
    the same index inside :func:`estimate_transient`.
    """
    validate(params)
    N, lam, mu, xi = params.N, params.lam, params.mu, params.xi
    ccum = _ccum(params)
    key = _kernels.stream_key(int(seed), rep)
    c = 0
    k, j, t = 0, params.l0 - 1, 0.0
    path = [Event(0.0, 0, j + 1)]
    while True:
        if k == 0:
            up, down, rate = lam * N, 0.0, lam * N
        else:
            up = lam * (N - k) if k < N else 0.0
            down = mu * (N + k)
            rate = up + down + xi
        u1 = _kernels.stream_uniform(key, c)
        c += 1
        t -= math.log(u1) / rate
        if t >= horizon:
            return path
        u2 = _kernels.stream_uniform(key, c)
        c += 1
        if k == 0:
            row = ccum[j]
            j = next((i for i in range(len(row) - 1) if u2 < row[i]), len(row) - 1)
            k = 1
        else:
            x = u2 * rate
            if x < up:
                k += 1
            elif x < up + down:
                k -= 1
            else:
                k = 0
        path.append(Event(t, k, j + 1))


def check_path(params: ModelParams, path: Sequence[Event]) -> None:
    """Raise ``AssertionError`` on any illegal transition in ``path``.

    Legal moves: one level up or down in the same phase, a reset to level 0
    in the same phase, or a departure from level 0 to level 1 in a phase
    that row ``l`` of ``C`` allows.
    """
    C = params.C.c
    for a, b in zip(path, path[1:]):
        assert b.time >= a.time, "time went backwards"
        if a.k == 0:
            assert b.k == 1 and C[a.j - 1, b.j - 1] > 0, f"bad departure {a} -> {b}"
            continue
        assert b.j == a.j, f"phase changed away from level 0: {a} -> {b}"
        assert b.k in (a.k + 1, a.k - 1, 0) and b.k <= params.N, f"bad move {a} -> {b}"


def _chunks(n):
    return [(r0, min(CHUNK, n - r0)) for r0 in range(0, n, CHUNK)]


@dataclass(frozen=True)
class TransientEstimate:
    """Occupancy frequencies at each time; arrays have shape ``(len(times), n_states)``."""

    times: np.ndarray
    point: np.ndarray
    stderr: np.ndarray
    n: int
    N: int
    d: int

    def get(self, t_index: int, k: int, j: int) -> SimEstimate:
        s = k * self.d + (j - 1)
        return SimEstimate(float(self.point[t_index, s]), float(self.stderr[t_index, s]), self.n)

    def level(self, t_index: int, k: int) -> SimEstimate:
        p = float(self.point[t_index].reshape(self.N + 1, self.d)[k].sum())
        return SimEstimate(p, math.sqrt(max(p * (1 - p), 0.0) / self.n), self.n)

    def level_point(self) -> np.ndarray:
        return self.point.reshape(len(self.times), self.N + 1, self.d).sum(axis=2)

    def level_stderr(self) -> np.ndarray:
        p = self.level_point()
        return np.sqrt(np.clip(p * (1 - p), 0, None) / self.n)


def estimate_transient(params: ModelParams, cfg: SimConfig, times: Sequence[float] | None = None,
                       backend: str | None = None) -> TransientEstimate:
    """Frequencies of each state at the requested times with binomial standard errors."""
    validate(params)
    ts = np.asarray(times if times is not None else cfg.times, dtype=float)
    if ts.ndim != 1 or ts.size == 0:
        raise DomainError("no observation times")
    if np.any(ts < 0) or np.any(ts > cfg.horizon):
        raise DomainError("observation times must lie in [0, horizon]")
    order = np.argsort(ts, kind="stable")
    sorted_ts = np.ascontiguousarray(ts[order])
    ccum = _ccum(params)
    ns = params.n_states
    n = int(cfg.replications)
    seed = np.uint64(int(cfg.seed))

    def run(chunk):
        r0, m = chunk
        states = _kernels.gillespie_transient(params.N, params.d, params.lam, params.mu, params.xi,
                                              ccum, params.l0, sorted_ts, seed, r0, m, backend=backend)
        counts = np.zeros((sorted_ts.size, ns), dtype=np.int64)
        for i in range(sorted_ts.size):
            counts[i] = np.bincount(states[:, i], minlength=ns)
        return counts

    counts = sum(ordered_map(run, _chunks(n)))
    p = np.empty_like(counts, dtype=float)
    p[order] = counts / n
    se = np.sqrt(np.clip(p * (1 - p), 0, None) / n)
    return TransientEstimate(times=ts, point=p, stderr=se, n=n, N=params.N, d=params.d)


@dataclass(frozen=True)
class StationaryEstimate:
    """Time-average occupancy with replication-level standard errors."""

    point: np.ndarray
    stderr: np.ndarray
    n: int
    N: int
    d: int
    burn_in: float

    def get(self, k: int, j: int) -> SimEstimate:
        s = k * self.d + (j - 1)
        return SimEstimate(float(self.point[s]), float(self.stderr[s]), self.n)

    def level(self) -> tuple[np.ndarray, np.ndarray]:
        return self._marg(axis=1)

    def phase(self) -> tuple[np.ndarray, np.ndarray]:
        return self._marg(axis=0)

    def _marg(self, axis):
        f = self._fractions.reshape(self.n, self.N + 1, self.d).sum(axis=1 + axis)
        return f.mean(axis=0), _se(f)

    _fractions: np.ndarray = None


def _se(x):
    if x.shape[0] < 2:
        return np.zeros(x.shape[1:])
    return x.std(axis=0, ddof=1) / math.sqrt(x.shape[0])


def estimate_stationary(params: ModelParams, cfg: SimConfig, backend: str | None = None) -> StationaryEstimate:
    """Average of per-replication occupancy fractions over ``[burn_in, horizon]``."""
    validate(params)
    burn = cfg.burn_in if cfg.burn_in is not None else default_burn_in(params)
    if not 0 <= burn < cfg.horizon:
        raise DomainError(f"burn_in {burn} must be below the horizon {cfg.horizon}")
    ccum = _ccum(params)
    seed = np.uint64(int(cfg.seed))

    def run(chunk):
        r0, m = chunk
        return _kernels.gillespie_occupancy(params.N, params.d, params.lam, params.mu, params.xi,
                                            ccum, params.l0, float(burn), float(cfg.horizon),
                                            seed, r0, m, backend=backend)

    frac = np.concatenate(ordered_map(run, _chunks(int(cfg.replications))), axis=0)
    return StationaryEstimate(point=frac.mean(axis=0), stderr=_se(frac), n=frac.shape[0],
                              N=params.N, d=params.d, burn_in=float(burn), _fractions=frac)


@dataclass(frozen=True)
class ScaledSample:
    """Independent draws of ``N * eps`` (one per replication), sorted."""

    values: np.ndarray
    epsilon: float
    N: int

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def stderr(self) -> float:
        v = self.values
        return float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0

    def cdf(self, x) -> np.ndarray:
        return np.searchsorted(self.values, np.asarray(x, dtype=float), side="right") / self.values.size

    def sup_distance(self, target_cdf) -> float:
        """Kolmogorov distance to a continuous CDF given as a callable."""
        v = self.values
        F = np.asarray(target_cdf(v), dtype=float)
        n = v.size
        hi = np.arange(1, n + 1) / n
        lo = np.arange(0, n) / n
        return float(max(np.max(np.abs(hi - F)), np.max(np.abs(F - lo))))


def scaled_sample(alpha: float, gamma: float, nu: float, epsilon: float, cfg: SimConfig,
                  xi: float = 0.0, t: float | None = None, backend: str | None = None) -> ScaledSample:
    """Samples of the scaled level ``N * eps`` from level 0 at time ``t``.

    ``t=None`` reads each replication at ``cfg.horizon``, which should be
    long enough for the chain to be close to stationarity.
    """
    N = max(1, int(round(nu / epsilon**2)))
    lam, mu, _ = scaling_map(alpha, gamma, epsilon, N, xi=xi)
    params = ModelParams(N=N, lam=lam, mu=mu, xi=xi)
    at = cfg.horizon if t is None else float(t)
    est_cfg = SimConfig(replications=cfg.replications, horizon=max(cfg.horizon, at), seed=cfg.seed)
    ccum = _ccum(params)
    seed = np.uint64(int(cfg.seed))
    ts = np.array([at])

    def run(chunk):
        r0, m = chunk
        return _kernels.gillespie_transient(N, 1, lam, mu, xi, ccum, 1, ts, seed, r0, m, backend=backend)[:, 0]

    levels = np.concatenate(ordered_map(run, _chunks(int(est_cfg.replications))))
    return ScaledSample(values=np.sort(levels * epsilon), epsilon=epsilon, N=N)
