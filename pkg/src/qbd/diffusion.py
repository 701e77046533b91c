"""Reflected Ornstein-Uhlenbeck jump diffusion on the half line.

The scaled level process ``N(t) * eps`` of the QBD approaches a diffusion
with drift ``-alpha (x - beta)``, infinitesimal variance ``sigma2``, a
reflecting barrier at 0, and jumps to 0 at rate ``xi``. This module holds
the scaling map, the transient density for ``beta = 0``, the Laplace
transform of the catastrophe-free density, the stationary density and
moments, ray densities, and an empirical convergence probe against the
discrete chain.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from ._parallel import ordered_map
from .errors import DomainError, NoConvergence, QuadratureFailure, Unsupported
from .model import ModelParams, build_generator
from .specfun import (
    DEFAULT_CONTROL,
    SeriesControl,
    erf_erfc,
    hermite_h_log,
    hyp_1f1,
    upper_gamma,
    upper_gamma_scaled_sequence,
)

__all__ = [
    "DiffusionParams",
    "scaling_map",
    "quadrature_domain",
    "reflected_ou_density",
    "h_beta0",
    "h_integer_ratio",
    "h_general",
    "laplace_rtilde",
    "stationary_density",
    "stationary_cdf",
    "StationaryMoments",
    "stationary_moments",
    "moments_by_quadrature",
    "ray_density",
    "ProbeRow",
    "ProbeReport",
    "convergence_probe",
]

QUAD_WIDTH = 12.0
_QUAD_OPTS = dict(epsabs=1e-14, epsrel=1e-12, limit=400)
# series route for h_beta0 is abandoned past this many terms
_SERIES_BUDGET = 4000
# below this |beta| sqrt(alpha)/sigma the second moment uses the contiguous form
_SMALL_BETA = 1e-3


@dataclass(frozen=True)
class DiffusionParams:
    """Parameters of the reflected OU jump diffusion.

    Parameters
    ----------
    alpha : float
        Mean-reversion rate, ``> 0``.
    beta : float
        Long-run location; may be negative.
    sigma2 : float
        Infinitesimal variance, ``> 0``.
    xi : float
        Catastrophe (jump to 0) rate, ``>= 0``.
    gamma, epsilon, nu : float, optional
        Scaling triple when built by :func:`scaling_map`.
    """

    alpha: float
    beta: float
    sigma2: float
    xi: float = 0.0
    gamma: float | None = None
    epsilon: float | None = None
    nu: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise DomainError("alpha must be positive")
        if not (math.isfinite(self.sigma2) and self.sigma2 > 0):
            raise DomainError("sigma2 must be positive")
        if not (math.isfinite(self.xi) and self.xi >= 0):
            raise DomainError("xi must be nonnegative")
        if not math.isfinite(self.beta):
            raise DomainError("beta must be finite")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def replace(self, **kw) -> "DiffusionParams":
        d = dict(alpha=self.alpha, beta=self.beta, sigma2=self.sigma2, xi=self.xi,
                 gamma=self.gamma, epsilon=self.epsilon, nu=self.nu)
        d.update(kw)
        return DiffusionParams(**d)

    def to_dict(self) -> dict:
        out = {"alpha": self.alpha, "beta": self.beta, "sigma2": self.sigma2, "xi": self.xi}
        if self.nu is not None:
            out.update(gamma=self.gamma, epsilon=self.epsilon, nu=self.nu)
        return out


def scaling_map(alpha: float, gamma: float, epsilon: float, N: int, xi: float = 0.0):
    """QBD rates and diffusion parameters for one point of the scaling.

    Returns
    -------
    lam, mu : float
        ``alpha/2 + gamma*eps/2`` and ``alpha/2 - gamma*eps/2``.
    dp : DiffusionParams
        With ``nu = N eps**2``, ``sigma2 = alpha nu`` and ``beta = gamma nu / alpha``.

    Examples
    --------
    >>> lam, mu, dp = scaling_map(1.0, 1.0, 0.1, 100)
    >>> round(lam, 12), round(mu, 12), round(dp.sigma2, 12), round(dp.beta, 12)
    (0.55, 0.45, 1.0, 1.0)
    """
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    if N < 1:
        raise DomainError("N must be >= 1")
    lam = alpha / 2 + gamma * epsilon / 2
    mu = alpha / 2 - gamma * epsilon / 2
    if not (lam > 0 and mu > 0):
        raise DomainError(f"scaling gives nonpositive rates (lambda={lam}, mu={mu})")
    nu = N * epsilon**2
    dp = DiffusionParams(alpha=alpha, beta=gamma * nu / alpha, sigma2=alpha * nu, xi=xi,
                         gamma=gamma, epsilon=epsilon, nu=nu)
    return lam, mu, dp


def quadrature_domain(dp: DiffusionParams, width: float = QUAD_WIDTH) -> float:
    """Upper end ``max(beta, 0) + width * sigma / sqrt(alpha)`` of the x integrals."""
    return max(dp.beta, 0.0) + width * dp.sigma / math.sqrt(dp.alpha)


def _quad(f, a, b, points=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info, *rest = integrate.quad(f, a, b, points=points, full_output=1, **_QUAD_OPTS)
    if rest and err > 1e-9 * max(1.0, abs(val)):
        raise QuadratureFailure(f"quad on [{a}, {b}]: {rest[0]} (err {err:.2e})")
    return val


def _elementwise(fn, x):
    if np.ndim(x) == 0:
        return fn(float(x))
    arr = np.asarray(x, dtype=float)
    return np.array([fn(float(v)) for v in arr.ravel()]).reshape(arr.shape)


def _require_x(x):
    if not x >= 0:
        raise DomainError("x must be nonnegative")


# --- transient, beta = 0 ----------------------------------------------------

def _require_beta0(dp):
    if dp.beta != 0:
        raise Unsupported("closed transient density is available only for beta = 0")


def reflected_ou_density(dp: DiffusionParams, x, t: float):
    """Catastrophe-free density started at 0 when ``beta = 0``.

    ``2 sqrt(alpha / (pi sigma2 q)) exp(-alpha x**2 / (sigma2 q))`` with
    ``q = 1 - exp(-2 alpha t)``.
    """
    _require_beta0(dp)
    if not t > 0:
        raise DomainError("t must be positive")
    q = -math.expm1(-2 * dp.alpha * t)
    c = 2 * math.sqrt(dp.alpha / (math.pi * dp.sigma2 * q))
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0):
        raise DomainError("x must be nonnegative")
    out = c * np.exp(-dp.alpha * xs * xs / (dp.sigma2 * q))
    return float(out) if np.ndim(x) == 0 else out


def _h_series(dp, x, t, ctl):
    al, s2, xi = dp.alpha, dp.sigma2, dp.xi
    q = -math.expm1(-2 * al * t)
    gauss = 2 * math.exp(-xi * t) * math.sqrt(al / (math.pi * s2 * q)) * math.exp(-al * x * x / (s2 * q))
    if xi == 0:
        return gauss
    a = xi / (2 * al)
    z = al * x * x / (s2 * q)
    # term n: c_n q^n f_n with c_n = (1-a)_n/n!, f_n = z^(1/2+n) Gamma(-1/2-n, z)
    limit = min(ctl.max_terms, _SERIES_BUDGET)
    total = 0.0
    comp = 0.0
    c = 1.0
    qn = 1.0
    small = 0
    n = 0
    chunk = 64
    prev = None
    while n < limit:
        fs = upper_gamma_scaled_sequence(-0.5 - n, min(chunk, limit - n), z, prev)
        prev = fs[-1]
        done = False
        for f in fs:
            term = c * qn * f
            y = total + term
            comp += (total - y) + term if abs(total) >= abs(term) else (term - y) + total
            total = y
            c *= (1 - a + n) / (n + 1)
            qn *= q
            n += 1
            if c == 0.0:
                done = True
                break
            if abs(term) <= ctl.rel_tol * abs(total + comp):
                small += 1
                if small >= 2:
                    done = True
                    break
            else:
                small = 0
        if done:
            return gauss + xi * math.sqrt(q / al) / (math.sqrt(math.pi) * dp.sigma) * (total + comp)
        chunk *= 2
    raise NoConvergence(f"beta=0 density series needs more than {limit} terms")


def _series_terms_needed(dp, t, ctl):
    q = -math.expm1(-2 * dp.alpha * t)
    if q >= 1.0:
        return math.inf
    return math.log(ctl.rel_tol) / math.log(q)


def h_beta0(dp: DiffusionParams, x, t: float, truncation: SeriesControl = DEFAULT_CONTROL):
    """Transient density of the diffusion started at 0, for ``beta = 0``.

    The Gaussian reflected term plus the catastrophe series

    ``xi sqrt(q/alpha) / (sqrt(pi) sigma) * sum_n (1-a)_n/n! q**n z**(1/2+n) Gamma(-1/2-n, z)``

    with ``a = xi/(2 alpha)``, ``q = 1 - exp(-2 alpha t)`` and
    ``z = alpha x**2 / (sigma2 q)``. The series ratio tends to ``q``; when
    that is too close to 1 for the term budget the equivalent time integral
    (:func:`h_general`) is evaluated instead.
    """
    _require_beta0(dp)
    if not t > 0:
        raise DomainError("t must be positive")
    use_series = dp.xi == 0 or _series_terms_needed(dp, t, truncation) < 0.5 * _SERIES_BUDGET
    if not use_series and dp.xi / (2 * dp.alpha) == round(dp.xi / (2 * dp.alpha)):
        use_series = True  # finite sum for integer xi/(2 alpha)

    def one(v):
        _require_x(v)
        if use_series:
            return _h_series(dp, v, t, truncation)
        return _h_general_scalar(dp, v, t, None)

    return _elementwise(one, x)


def h_integer_ratio(dp: DiffusionParams, x, t: float):
    """Finite-sum form of the ``beta = 0`` density when ``xi = 2 m alpha``.

    Evaluated literally with ``Gamma(-1/2-n, .)``; needs ``x > 0``.
    """
    _require_beta0(dp)
    m_real = dp.xi / (2 * dp.alpha)
    m = round(m_real)
    if m < 1 or abs(m_real - m) > 1e-12:
        raise DomainError("xi / (2 alpha) must be a positive integer")
    al, s2, sg = dp.alpha, dp.sigma2, dp.sigma
    ct = 1 + 1 / math.tanh(al * t)

    def one(v):
        if not v > 0:
            raise DomainError("the finite-sum form needs x > 0")
        zz = v * v * al * ct / (2 * s2)
        first = math.exp(-2 * m * t * al - zz) * math.sqrt(2 * al * ct) / (math.sqrt(math.pi) * sg)
        y = v * v * al / s2
        s = 0.0
        for n in range(m):
            s += math.comb(m - 1, n) * (-y) ** n * upper_gamma(-0.5 - n, zz)
        return first + 2 * m * v * al / (math.sqrt(math.pi) * s2) * s

    return _elementwise(one, x)


def _h_general_scalar(dp, x, t, rtilde):
    r = rtilde if rtilde is not None else (lambda xx, tau: reflected_ou_density(dp, xx, tau))
    head = math.exp(-dp.xi * t) * r(x, t)
    if dp.xi == 0:
        return head
    xi = dp.xi
    # tau = s^2 removes the tau^(-1/2) behaviour of r at tau -> 0
    def f(s):
        s = max(s, 1e-12)  # Gauss-Kronrod nodes avoid 0; guard direct calls
        tau = s * s
        return 2 * s * math.exp(-xi * tau) * r(x, tau)

    b = math.sqrt(t)
    pts = [p for p in (0.25 * b, 0.5 * b, math.sqrt(min(t, 1 / max(xi, dp.alpha)))) if 0 < p < b]
    return head + xi * _quad(f, 0.0, b, points=sorted(set(pts)) or None)


def h_general(dp: DiffusionParams, x, t: float,
              rtilde: Callable[[float, float], float] | None = None,
              allow_beta_nonzero: bool = False):
    """``e**(-xi t) r(x,t) + xi * int_0^t e**(-xi tau) r(x,tau) dtau``.

    ``r`` is the catastrophe-free density started at 0. Without ``rtilde``
    the ``beta = 0`` closed form is used. A supplied kernel for
    ``beta != 0`` is accepted only with ``allow_beta_nonzero=True``.

    Raises
    ------
    Unsupported
        ``beta != 0`` and the extension is not enabled.
    QuadratureFailure
        The time integral did not meet its tolerance.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    if dp.beta != 0:
        if rtilde is None or not allow_beta_nonzero:
            raise Unsupported("beta != 0 transient density is disabled")
    elif rtilde is None:
        _require_beta0(dp)

    def one(v):
        _require_x(v)
        return _h_general_scalar(dp, v, t, rtilde)

    return _elementwise(one, x)


# --- stationary ---------------------------------------------------------------

def _w_log(alpha, beta, sigma, p, x):
    """``(log|value|, sign)`` of the stationary density with ``xi`` replaced by ``p``."""
    ra = math.sqrt(alpha)
    l1, s1 = hermite_h_log(-p / alpha, ra * (x - beta) / sigma)
    l2, s2 = hermite_h_log(-1 - p / alpha, -ra * beta / sigma)
    if s2 == 0:
        raise DomainError("normalizing Hermite value vanished")
    lv = 0.5 * math.log(alpha) - math.log(sigma) - alpha / sigma**2 * ((x - beta) ** 2 - beta**2) + l1 - l2
    return lv, s1 * s2


def stationary_density(dp: DiffusionParams, x):
    """Stationary density

    ``(sqrt(alpha)/sigma) exp(-(alpha/sigma2)((x-beta)**2 - beta**2))
    H(-xi/alpha, sqrt(alpha)(x-beta)/sigma) / H(-1-xi/alpha, -sqrt(alpha) beta/sigma)``.

    The Hermite ratio is formed from logarithms so extreme magnitudes do
    not overflow.

    Examples
    --------
    >>> dp = DiffusionParams(alpha=1.0, beta=0.0, sigma2=1.0, xi=0.0)
    >>> round(stationary_density(dp, 0.0), 12) == round(2 / math.sqrt(math.pi), 12)
    True
    """
    al, be, sg, xi = dp.alpha, dp.beta, dp.sigma, dp.xi

    def one(v):
        _require_x(v)
        lv, s = _w_log(al, be, sg, xi, v)
        return s * math.exp(lv) if s else 0.0

    return _elementwise(one, x)


def laplace_rtilde(dp: DiffusionParams, p: float, x):
    """Laplace transform in time, at ``p > 0``, of the catastrophe-free density.

    ``exp(-(alpha/sigma2)((x-beta)**2 - beta**2)) (sqrt(alpha)/(sigma p))
    H(-p/alpha, sqrt(alpha)(x-beta)/sigma) / H(-1-p/alpha, -sqrt(alpha) beta/sigma)``.
    ``xi`` of ``dp`` plays no role.
    """
    if not p > 0:
        raise DomainError("p must be positive")
    al, be, sg = dp.alpha, dp.beta, dp.sigma

    def one(v):
        _require_x(v)
        lv, s = _w_log(al, be, sg, p, v)
        return s * math.exp(lv - math.log(p)) if s else 0.0

    return _elementwise(one, x)


def stationary_cdf(dp: DiffusionParams, x_grid: Sequence[float]) -> np.ndarray:
    """``int_0^x w`` on an increasing grid starting at 0, by adaptive quadrature per cell."""
    xs = np.asarray(x_grid, dtype=float)
    if xs.ndim != 1 or xs.size == 0 or xs[0] != 0 or np.any(np.diff(xs) <= 0):
        raise DomainError("grid must be increasing and start at 0")
    out = np.zeros_like(xs)
    w = lambda v: stationary_density(dp, v)
    acc = 0.0
    for i in range(1, xs.size):
        acc += _quad(w, xs[i - 1], xs[i])
        out[i] = acc
    return out


@dataclass(frozen=True)
class StationaryMoments:
    """Closed-form stationary moments and whichever reductions apply."""

    ez: float
    ez2: float
    ez_xi0: float | None = None
    ez2_xi0: float | None = None
    ez_beta0: float | None = None
    ez2_beta0: float | None = None
    form: str = "printed"

    @property
    def variance(self) -> float:
        return self.ez2 - self.ez**2


def _moments_general(dp, form):
    al, be, sg, xi = dp.alpha, dp.beta, dp.sigma, dp.xi
    s2 = dp.sigma2
    a = xi / (2 * al)
    u = al * be * be / s2
    ra = math.sqrt(al)
    lH2, sH2 = hermite_h_log(-1 - 2 * a, -ra * be / sg)
    if sH2 <= 0:
        raise DomainError("normalizing Hermite value is not positive")
    g1 = math.lgamma(1 + a)
    g15 = math.lgamma(1.5 + a)
    lg3 = math.lgamma(3 + 2 * a)

    pre1 = math.exp(-2 * a * math.log(2) + 0.5 * math.log(math.pi) - lH2)
    ez = pre1 * (
        sg / (4 * ra) * math.exp(-g15) * hyp_1f1(1 + a, 0.5, u)
        + be / 2 * math.exp(-g1) * hyp_1f1(0.5 + a, 0.5, u)
        - be**3 * xi / (3 * s2) * math.exp(-g1) * hyp_1f1(1.5 + a, 2.5, u)
    )

    # xi Gamma(xi/(2 alpha)) is written 2 alpha Gamma(1 + a) so xi = 0 is regular
    two_a_gam = 2 * al * math.exp(g1)
    if form == "printed":
        bracket = (
            -(al + xi) * s2 * two_a_gam * hyp_1f1(a, 0.5, u)
            + ((al + xi) * s2 + 2 * al * al * be * be) * two_a_gam * hyp_1f1(1 + a, 0.5, u)
            + 4 * al**2.5 * be * sg * math.exp(g15) * hyp_1f1(1.5 + a, 0.5, u)
        ) / be
    else:
        # M(1+a,1/2,u) - M(a,1/2,u) = 2u M(1+a,3/2,u) removes the 1/beta
        bracket = (
            4 * al * al * be * (al + xi) * math.exp(g1) * hyp_1f1(1 + a, 1.5, u)
            + 4 * al**3 * be * math.exp(g1) * hyp_1f1(1 + a, 0.5, u)
            + 4 * al**2.5 * sg * math.exp(g15) * hyp_1f1(1.5 + a, 0.5, u)
        )
    ez2 = sg / (4 * al**3.5) * math.exp(-lg3 - lH2) * bracket
    return ez, ez2


def stationary_moments(dp: DiffusionParams, form: str = "auto") -> StationaryMoments:
    """First and second stationary moments from the Hermite and 1F1 closed forms.

    Parameters
    ----------
    form : {"auto", "printed", "contiguous"}
        ``"printed"`` evaluates the second moment with its explicit
        ``1/beta`` prefactor; ``"contiguous"`` uses
        ``M(1+a,1/2,u) - M(a,1/2,u) = 2u M(1+a,3/2,u)`` to cancel it, which
        is the only usable form near ``beta = 0``. ``"auto"`` picks
        ``"printed"`` unless ``|beta| sqrt(alpha)/sigma`` is tiny.

    Examples
    --------
    >>> m = stationary_moments(DiffusionParams(alpha=1.0, beta=0.0, sigma2=1.0, xi=0.0))
    >>> round(m.ez, 7)
    0.5641896
    """
    small = abs(dp.beta) * math.sqrt(dp.alpha) / dp.sigma < _SMALL_BETA
    if form == "auto":
        form = "contiguous" if small else "printed"
    if form not in ("printed", "contiguous"):
        raise DomainError(f"unknown form {form!r}")
    if form == "printed" and dp.beta == 0:
        raise DomainError("the printed second-moment form divides by beta")
    ez, ez2 = _moments_general(dp, form)

    al, be, sg, xi = dp.alpha, dp.beta, dp.sigma, dp.xi
    a = xi / (2 * al)
    kw = {}
    if xi == 0:
        v = math.sqrt(al) * be / sg
        _, erfc_neg = erf_erfc(-v)  # 1 + erf(v)
        q = sg * math.exp(-v * v) / (math.sqrt(math.pi * al) * erfc_neg)
        kw.update(ez_xi0=be + q, ez2_xi0=be * be + dp.sigma2 / (2 * al) + be * q)
    if be == 0:
        kw.update(
            ez_beta0=sg * math.exp(math.lgamma(1 + a) - math.lgamma(1.5 + a)) / (2 * math.sqrt(al)),
            ez2_beta0=math.exp((1 + 2 * a) * math.log(2) + math.lgamma(1.5 + a) + math.lgamma(1 + a)
                               - math.lgamma(3 + 2 * a)) * dp.sigma2 / (math.sqrt(math.pi) * al),
        )
    return StationaryMoments(ez=ez, ez2=ez2, form=form, **kw)


def moments_by_quadrature(dp: DiffusionParams, width: float = QUAD_WIDTH) -> tuple[float, float, float]:
    """``(int w, int x w, int x**2 w)`` over ``[0, quadrature_domain(dp)]``."""
    X = quadrature_domain(dp, width)
    pts = [X / 8, X / 4, X / 2]
    if dp.beta > 0:
        pts.append(dp.beta)
    pts = sorted(p for p in set(pts) if 0 < p < X)
    w = lambda v: stationary_density(dp, v)
    return (
        _quad(w, 0.0, X, pts),
        _quad(lambda v: v * w(v), 0.0, X, pts),
        _quad(lambda v: v * v * w(v), 0.0, X, pts),
    )


def ray_density(dp: DiffusionParams, pi: Sequence[float], x, j: int):
    """Density on ray ``j`` (1-based): ``pi_j w(x)``."""
    pi = np.asarray(pi, dtype=float)
    if not 1 <= j <= pi.size:
        raise DomainError(f"phase {j} outside 1..{pi.size}")
    return pi[j - 1] * stationary_density(dp, x)


# --- convergence probe -----------------------------------------------------------

@dataclass(frozen=True)
class ProbeRow:
    epsilon: float
    N: int
    sup_distance: float


@dataclass(frozen=True)
class ProbeReport:
    """Sup-distances between scaled QBD CDFs and the diffusion CDF, in input order."""

    rows: tuple
    target: str
    params: dict = field(default_factory=dict)

    @property
    def decreasing(self) -> bool:
        d = [r.sup_distance for r in self.rows]
        return all(b < a for a, b in zip(d, d[1:]))

    @property
    def final(self) -> float:
        return self.rows[-1].sup_distance

    def to_records(self) -> list[dict]:
        return [{"epsilon": r.epsilon, "N": r.N, "sup_distance": r.sup_distance} for r in self.rows]


def _step_cdf(prob, eps, xs):
    # mass prob[k] spread uniformly over [k eps, (k+1) eps)
    cum = np.concatenate([[0.0], np.cumsum(prob)])
    pos = xs / eps
    k = np.minimum(np.floor(pos).astype(int), prob.size)
    frac = pos - k
    pk = np.where(k < prob.size, prob[np.minimum(k, prob.size - 1)], 0.0)
    return cum[k] + frac * pk


def _target_cdf(dp, t, xs):
    if t is None:
        return stationary_cdf(dp, xs)
    out = np.zeros_like(xs)
    acc = 0.0
    h = lambda v: h_beta0(dp, v, t)
    for i in range(1, xs.size):
        acc += _quad(h, xs[i - 1], xs[i])
        out[i] = acc
    return out


def convergence_probe(alpha: float, gamma: float, nu: float, epsilon_list: Sequence[float],
                      t_or_stationary: float | str | None = "stationary", xi: float = 0.0,
                      cells_per_eps: int = 8) -> ProbeReport:
    """Compare the scaled QBD law with the diffusion law along an ``eps`` ladder.

    For each ``eps`` the chain has ``N = round(nu / eps**2)`` and rates from
    :func:`scaling_map`, with a single phase. Its level law (stationary, or
    at time ``t`` from level 0) is spread uniformly over cells of width
    ``eps`` and the resulting CDF is compared with the diffusion CDF on a
    grid ``cells_per_eps`` times finer than the cells.
    """
    from .stationary import stationary_numeric
    from .transient import TransientPath

    t = None if t_or_stationary in (None, "stationary") else float(t_or_stationary)
    if t is not None and not t > 0:
        raise DomainError("t must be positive")
    eps_list = [float(e) for e in epsilon_list]
    if not eps_list:
        raise DomainError("empty epsilon list")

    def run(eps):
        N = max(1, int(round(nu / eps**2)))
        lam, mu, dp = scaling_map(alpha, gamma, eps, N, xi=xi)
        params = ModelParams(N=N, lam=lam, mu=mu, xi=xi)
        gen = build_generator(params)
        if t is None:
            prob = stationary_numeric(gen).rho
        else:
            prob = TransientPath(gen, 1).marginals([t])[0]
        X = min(N * eps, quadrature_domain(dp))
        n_cells = int(math.ceil(X / eps))
        xs = np.linspace(0.0, n_cells * eps, n_cells * cells_per_eps + 1)
        dist = np.abs(_step_cdf(np.asarray(prob), eps, xs) - _target_cdf(dp, t, xs))
        return ProbeRow(epsilon=eps, N=N, sup_distance=float(dist.max()))

    rows = tuple(ordered_map(run, eps_list))
    return ProbeReport(rows=rows, target="stationary" if t is None else f"t={t}",
                       params={"alpha": alpha, "gamma": gamma, "nu": nu, "xi": xi})
