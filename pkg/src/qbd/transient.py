"""Time-dependent distributions: uniformization, pgf, catastrophe transforms,
and the closed forms available when ``lam == mu``."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import pdtr, pdtrc

from . import _kernels
from .errors import DomainError, QuadratureFailure, RootBracketError
from .model import GeneratorMatrix, ModelParams, build_generator
from .specfun import gauss_2f1

__all__ = [
    "JointDistribution",
    "TransientPath",
    "solve_forward",
    "marginal",
    "pgf_numeric",
    "pgf_closed",
    "catastrophe_transform_prob",
    "catastrophe_transform_moment",
    "SpectralData",
    "spectral_data",
    "p0_closed",
    "pk_closed",
    "moments_closed",
    "laplace_p0",
]

POISSON_TAIL = 1e-12
QUAD_ABS = 1e-10
DEGENERATE_REL = 1e-9


@dataclass(frozen=True)
class JointDistribution:
    """Probabilities ``p(k, j, t)`` in level-major order."""

    t: float
    p: np.ndarray
    N: int
    d: int

    def joint(self) -> np.ndarray:
        """``(N+1) x d`` view."""
        return self.p.reshape(self.N + 1, self.d)


def _poisson_window(m: float, tail: float = POISSON_TAIL) -> tuple[int, int]:
    """Indices ``[kmin, kmax]`` holding all but ``tail`` of Poisson(m) mass."""
    if m == 0:
        return 0, 0
    sd = math.sqrt(m)
    kmax = int(m + 8 * sd + 20)
    while pdtrc(kmax, m) > tail / 2:
        kmax += int(sd) + 1
    kmin = max(0, int(m - 8 * sd - 20))
    while kmin > 0 and pdtr(kmin - 1, m) > tail / 2:
        kmin = max(0, kmin - int(sd) - 1)
    return kmin, kmax


def _poisson_weights(m: float, kmin: int, kmax: int) -> np.ndarray:
    k = np.arange(kmin, kmax + 1, dtype=float)
    if m == 0:
        w = np.zeros(k.size)
        w[0] = 1.0
        return w
    from scipy.special import gammaln

    return np.exp(k * math.log(m) - m - gammaln(k + 1))


class TransientPath:
    """Uniformization solver bound to one generator and initial phase.

    Results are memoized by time, so quadratures over ``[0, t]`` reuse
    previous solves. Instances hold no mutable state other than that cache.

    Parameters
    ----------
    gen : GeneratorMatrix
    l0 : int
        Initial phase, 1-based; the chain starts in state ``(0, l0)``.
    backend : str, optional
        ``"numba"`` or ``"numpy"``; defaults to the active kernel backend.
    """

    def __init__(self, gen: GeneratorMatrix, l0: int = 1, backend: str | None = None):
        self.gen = gen
        self.l0 = l0
        self.backend = backend
        Q = gen.Q
        diag = Q.diagonal()
        self.rate = float(np.max(-diag)) if diag.size else 0.0
        n = gen.n_states
        import scipy.sparse as sp

        if self.rate > 0:
            P = sp.identity(n, format="csr") + Q / self.rate
        else:
            P = sp.identity(n, format="csr")
        PT = sp.csr_matrix(P.T)
        PT.sort_indices()
        self._csr = (PT.indptr.astype(np.int64), PT.indices.astype(np.int64), PT.data.astype(float))
        self.p0 = np.zeros(n)
        self.p0[l0 - 1] = 1.0
        self._cache: dict[float, np.ndarray] = {}

    @classmethod
    def from_params(cls, params: ModelParams, backend: str | None = None) -> "TransientPath":
        return cls(build_generator(params), params.l0, backend)

    def solve(self, times: Sequence[float]) -> np.ndarray:
        """Joint probability vectors at each time, shape ``(len(times), n)``."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if np.any(times < 0):
            raise DomainError("times must be nonnegative")
        out = np.empty((times.size, self.p0.size))
        todo = [i for i, t in enumerate(times) if float(t) not in self._cache]
        if todo:
            ms = [self.rate * times[i] for i in todo]
            wins = [_poisson_window(m) for m in ms]
            kmin = min(w[0] for w in wins)
            kmax = max(w[1] for w in wins)
            W = np.zeros((len(todo), kmax - kmin + 1))
            for row, (m, (a, b)) in enumerate(zip(ms, wins)):
                W[row, a - kmin:b - kmin + 1] = _poisson_weights(m, a, b)
            res = _kernels.uniformize(*self._csr, self.p0, W, kmin, backend=self.backend)
            for row, i in enumerate(todo):
                v = np.clip(res[row], 0.0, None)
                self._cache[float(times[i])] = v / v.sum()
        for i, t in enumerate(times):
            out[i] = self._cache[float(t)]
        return out

    def at(self, t: float) -> JointDistribution:
        return JointDistribution(float(t), self.solve([t])[0], self.gen.N, self.gen.d)

    def marginals(self, times: Sequence[float]) -> np.ndarray:
        """Level marginals ``p(k, t)``, shape ``(len(times), N+1)``."""
        P = self.solve(times)
        return P.reshape(P.shape[0], self.gen.N + 1, self.gen.d).sum(axis=2)


def solve_forward(Q: GeneratorMatrix, l0: int, t: float, backend: str | None = None) -> JointDistribution:
    """``p(t) = p(0) exp(Qt)`` by uniformization from the state ``(0, l0)``.

    The Poisson(``Lambda t``) mixture is truncated so that the neglected
    mass is below ``1e-12``.

    Examples
    --------
    >>> from qbd.model import ModelParams, build_generator
    >>> g = build_generator(ModelParams(N=1, lam=1.0, mu=1.0))
    >>> bool(round(solve_forward(g, 1, 1.0).p[0], 10) == round((2 + math.exp(-3)) / 3, 10))
    True
    """
    return TransientPath(Q, l0, backend).at(t)


def marginal(dist: JointDistribution) -> np.ndarray:
    """Level marginal ``p(k,t) = sum_j p(k,j,t)``."""
    return dist.joint().sum(axis=1)


def pgf_numeric(dist: JointDistribution, z: float) -> float:
    """``F(z,t) = sum_k z**k p(k,t)`` for ``0 <= z <= 1``."""
    if not 0 <= z <= 1:
        raise DomainError("z must lie in [0, 1]")
    m = marginal(dist)
    return float(np.polyval(m[::-1], z))


def _quad(f, a, b, abs_tol=QUAD_ABS):
    if b <= a:
        return 0.0
    val, err = integrate.quad(f, a, b, epsabs=abs_tol / 10, epsrel=1e-12, limit=200)
    if not err <= abs_tol:
        raise QuadratureFailure(f"quadrature error {err:.3g} above {abs_tol:.1g}")
    return val


def _quad_vec(f, a, b, abs_tol=QUAD_ABS):
    if b <= a:
        return np.zeros_like(np.asarray(f(a), dtype=float))
    val, err = integrate.quad_vec(f, a, b, epsabs=abs_tol / 10, epsrel=1e-12, limit=400)
    if not err <= abs_tol:
        raise QuadratureFailure(f"quadrature error {err:.3g} above {abs_tol:.1g}")
    return val


def pgf_closed(params: ModelParams, z: float, t: float, p0_path: Callable[[float], float]) -> float:
    """Integral representation of ``F(z,t)`` valid for any ``lam``, ``mu``.

    ``p0_path(y)`` must return ``p(0, y)`` for ``0 <= y <= t``. Both
    integrals are evaluated by adaptive quadrature.
    """
    if not 0 < z <= 1:
        raise DomainError("z must lie in (0, 1]")
    N, lam, mu, xi = params.N, params.lam, params.mu, params.xi
    s = lam + mu

    def A(u):
        e = math.exp(-u * s)
        return lam * (1 - z) * e + z * lam + mu, mu * (z - 1) * e + z * lam + mu

    a1, a2 = A(t)
    zs = z**N * s ** (2 * N)
    t1 = math.exp(-xi * t) * (a1 * a2) ** N / zs
    t2 = 0.0
    if xi > 0:
        def f2(y):
            b1, b2 = A(t - y)
            return math.exp(-xi * (t - y)) * (b1 * b2) ** N

        t2 = xi / zs * _quad(f2, 0.0, t, QUAD_ABS * zs / max(xi, 1.0))

    def f3(y):
        b1, b2 = A(t - y)
        return p0_path(y) * math.exp(-(s + xi) * (t - y)) * b1**N * b2 ** (N - 1)

    t3 = 0.0
    if z != 1:
        c3 = N * mu * (z - 1) / (z**N * s ** (2 * N - 1))
        t3 = c3 * _quad(f3, 0.0, t, QUAD_ABS / max(abs(c3), 1e-300))
    return t1 + t2 + t3


def catastrophe_transform_prob(p_free: Callable[[float], np.ndarray], xi: float, t: float) -> np.ndarray:
    """``e^{-xi t} p~(t) + xi * int_0^t e^{-xi tau} p~(tau) dtau``.

    ``p_free`` gives the catastrophe-free marginals of the same model.
    """
    base = np.asarray(p_free(t), dtype=float)
    if xi == 0:
        return base
    integral = _quad_vec(lambda u: math.exp(-xi * u) * np.asarray(p_free(u), dtype=float), 0.0, t, QUAD_ABS / xi)
    return math.exp(-xi * t) * base + xi * integral


def catastrophe_transform_moment(m_free: Callable[[float], float], xi: float, t: float) -> float:
    """Scalar version of :func:`catastrophe_transform_prob` for moment paths."""
    base = float(m_free(t))
    if xi == 0:
        return base
    integral = _quad(lambda u: math.exp(-xi * u) * float(m_free(u)), 0.0, t, QUAD_ABS / xi)
    return math.exp(-xi * t) * base + xi * integral


# --- lam == mu spectral closed forms ---------------------------------------


@dataclass(frozen=True)
class SpectralData:
    """Roots of ``P(x)`` in decreasing order with their residues ``R``."""

    mu: float
    N: int
    roots: np.ndarray
    residues: np.ndarray
    crosscheck: float | None = field(default=None, compare=False)


def _log_prod(x, offsets):
    terms = x + offsets
    sign = -1 if np.count_nonzero(terms < 0) % 2 else 1
    if np.any(terms == 0):
        return -math.inf, 0
    return float(np.sum(np.log(np.abs(terms)))), sign


def _bracket_sign(x, odd, even):
    la, sa = _log_prod(x, odd)
    lb, sb = _log_prod(x, even)
    if sa == 0:
        return sb
    if sb == 0:
        return sa
    if sa == sb:
        return sa
    return sa if la > lb else sb


def spectral_data(mu: float, N: int) -> SpectralData:
    """Roots and residues of ``P(x) = x[prod(x+2mu(2r+1)) + prod(x+2mu(2r+2))]``.

    The root 0 is explicit. Each negative root is found by bisection in
    ``(-2mu(2r+2), -2mu(2r+1))``, where the bracketed sum changes sign.
    For ``N <= 50`` the roots are also compared with a companion-matrix
    eigensolve; the largest relative gap is stored in ``crosscheck``.
    """
    if not mu > 0:
        raise DomainError("mu must be positive")
    r = np.arange(N)
    odd = 2 * mu * (2 * r + 1)
    even = 2 * mu * (2 * r + 2)
    roots = [0.0]
    for i in range(N):
        lo, hi = -even[i], -odd[i]
        slo = _bracket_sign(lo, odd, even)
        shi = _bracket_sign(hi, odd, even)
        if slo == shi or slo == 0 or shi == 0:
            raise RootBracketError(f"no sign change of P in ({lo}, {hi})")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi) or hi - lo <= 1e-15 * abs(mid):
                break
            sm = _bracket_sign(mid, odd, even)
            if sm == 0:
                lo = hi = mid
                break
            if sm == slo:
                lo = mid
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    roots = np.array(sorted(roots, reverse=True))
    residues = np.empty(N + 1)
    for k, a in enumerate(roots):
        ln, sn = _log_prod(a, odd)
        others = np.delete(roots, k)
        ld, sd = _log_prod(a, -others)
        residues[k] = sn * sd * math.exp(ln - ld - math.log(2.0))
    cross = None
    if N <= 50:
        poly = np.polyadd(np.poly(-odd), np.poly(-even))
        ev = np.sort(np.roots(poly).real)[::-1]
        cross = float(np.max(np.abs(ev - roots[1:]) / np.abs(roots[1:]))) if N else 0.0
    return SpectralData(mu=float(mu), N=N, roots=roots, residues=residues, crosscheck=cross)


def _central_ratio(N):
    # C(2N,N) / 4^N
    return math.exp(math.lgamma(2 * N + 1) - 2 * math.lgamma(N + 1) - N * math.log(4.0))


def p0_closed(mu: float, xi: float, N: int, t: float, spec: SpectralData | None = None) -> float:
    """Empty-system probability ``p(0,t)`` for ``lam == mu``."""
    spec = spec or spectral_data(mu, N)
    b = _central_ratio(N)
    v = 2 * b / (b + 1)
    for a, R in zip(spec.roots[1:], spec.residues[1:]):
        rate = xi - a
        e = math.exp(-rate * t)
        v += 2 * R * (e + xi / rate * (1 - e))
    return v


def _theta2(y, xi, t):
    if xi + y == 0:
        return 0.0
    return -math.expm1(-t * (xi + y)) * (y / (xi + y))


def _theta2_dy(y, xi, t):
    if xi + y == 0:
        return t
    e = math.exp(-t * (xi + y))
    return t * e * y / (xi + y) - math.expm1(-t * (xi + y)) * xi / (xi + y) ** 2


def _theta2_quotient(yk, yj, xi, t, mu):
    """``(theta2(yj) - theta2(yk)) / (yk - yj)``, with the derivative limit."""
    den = yk - yj
    if abs(den) < DEGENERATE_REL * mu:
        return -_theta2_dy(0.5 * (yk + yj), xi, t)
    return (_theta2(yj, xi, t) - _theta2(yk, xi, t)) / den


def _log_binom(n, k):
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def pk_closed(mu: float, xi: float, N: int, r: int, t: float,
              spec: SpectralData | None = None, printed_sign: bool = False) -> float:
    """Level probability ``p(r,t)``, ``1 <= r <= N``, for ``lam == mu``.

    Uses ``theta1(a,b,c) = 2F1(-a, -N+r+b; -2N+c; 2)`` and
    ``theta2(t,y) = (1 - e^{-t(xi+y)}) y/(xi+y)``. The sign in front of the
    two root sums is ``(-1)**(N-r)``; ``printed_sign=True`` switches to
    ``(-1)**(N-1)`` for comparison with the uncorrected expression.
    """
    if not 1 <= r <= N:
        raise DomainError("r must lie in 1..N")
    spec = spec or spectral_data(mu, N)
    A = np.abs(spec.roots)
    R = spec.residues

    def th1(a, b, c):
        return gauss_2f1(-a, -N + r + b, -2 * N + c, 2.0)

    def binom(n, k):
        if k < 0 or k > n:
            return 0.0
        return math.exp(_log_binom(n, k))

    v = 0.0
    for l in range(N + 1):
        v += binom(N, l) * (-1) ** l * th1(2 * l, 0, 0) * (1 - _theta2(4 * l * mu, xi, t))
    v *= math.exp(_log_binom(2 * N, N + r) - N * math.log(4.0))
    sgn = (-1) ** (N - 1) if printed_sign else (-1) ** (N - r)
    pref = mu * N * math.exp(-(2 * N - 2) * math.log(2.0)) * sgn
    b1 = binom(2 * N - 1, N + r)
    b0 = binom(2 * N - 1, N + r - 1)
    S = 0.0
    for j in range(N):
        y = 2 * mu * (2 * N - 2 * j - 1)
        inner = sum(R[k] * _theta2_quotient(A[k], y, xi, t, mu) for k in range(N + 1))
        S += binom(N - 1, j) * (-1) ** (N - 1 - j) * (b1 * th1(2 * j, 1, 1) - b0 * th1(2 * j, 0, 1)) * inner
    v += pref * S
    S = 0.0
    for j in range(N):
        y = 4 * mu * (N - j)
        inner = sum(R[k] * _theta2_quotient(A[k], y, xi, t, mu) for k in range(N + 1))
        S += binom(N - 1, j) * (-1) ** (N - 1 - j) * th1(2 * j, 0, 0) * inner
    v += pref * binom(2 * N, N + r) * S
    return v


def moments_closed(mu: float, xi: float, N: int, t: float,
                   spec: SpectralData | None = None) -> tuple[float, float]:
    """First and second moments ``M(t)``, ``M2(t)`` of the level for ``lam == mu``."""
    spec = spec or spectral_data(mu, N)
    A = np.abs(spec.roots)
    R = spec.residues

    def Y(a):
        return 1.0 if xi + a == 0 else xi / (xi + a)

    def phi(y):
        # (y/(xi+y)) e^{-t(xi+y)}
        return (1.0 - Y(y)) * math.exp(-t * (xi + y))

    def dphi(y):
        e = math.exp(-t * (xi + y))
        return (xi / (xi + y) ** 2 - t * y / (xi + y)) * e

    def quotient(yk, yj):
        # (phi(yj) - phi(yk)) / (yk - yj)
        if abs(yk - yj) < DEGENERATE_REL * mu:
            return -dphi(yj)
        return (phi(yj) - phi(yk)) / (yk - yj)

    M = 0.0
    M2 = 0.0
    for a, Rk in zip(A, R):
        # (Y(2mu) - Y(a)) / (a - 2mu) simplifies exactly
        if xi + a == 0:
            ydiff = (Y(2 * mu) - 1.0) / (a - 2 * mu)
        else:
            ydiff = xi / ((xi + 2 * mu) * (xi + a))
        M += Rk * (ydiff + quotient(a, 2 * mu))
        M2 += Rk * (Y(a) / (xi + 4 * mu) + quotient(a, 4 * mu))
    M *= 2 * mu * N
    M2 = 2 * N * mu / (4 * mu + xi) * (-math.expm1(-(xi + 4 * mu) * t)) - 2 * N * mu * M2
    return M, M2


def laplace_p0(params: ModelParams, eta: float) -> float:
    """Laplace transform of ``p(0,t)`` at ``eta > 0`` (any ``lam``, ``mu``)."""
    if not eta > 0:
        raise DomainError("eta must be positive")
    N, lam, mu, xi = params.N, params.lam, params.mu, params.xi
    a = (eta + xi) / (lam + mu)
    z = -lam / mu
    from .specfun import hyp_series_log

    ln, sn = hyp_series_log((a, -N), (a + N + 1,), z)
    ld, sd = hyp_series_log((a + 1, -N), (a + N + 1,), z)
    return (1 + xi / eta) * sn * sd * math.exp(ln - ld) / (eta + xi)
