"""Long-run distributions: linear-solve oracle, closed forms, large-N limits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from ._parallel import ordered_map
from .errors import DomainError, SingularSystem
from .model import GeneratorMatrix, ModelParams, build_generator, invariant_phase_distribution
from .specfun import hyp_3f2, hyp_series_log, log_pochhammer

__all__ = [
    "StationaryResult",
    "stationary_numeric",
    "g_exact",
    "pgf_stationary",
    "rho_closed_general",
    "rho_closed_general_printed",
    "rho_closed_eq",
    "rho_closed",
    "MeanVar",
    "mean_var_printed",
    "mean_var_closed",
    "decoupling",
    "GApproxCoefficients",
    "g_approx_coefficients",
    "g_approx",
    "limit_mean",
    "limit_variance",
    "MonotonicityReport",
    "rho0_monotonicity_scan",
]


@dataclass(frozen=True)
class StationaryResult:
    """Stationary law: level marginal, joint law, phase law and moments."""

    rho: np.ndarray
    rho_joint: np.ndarray
    pi: np.ndarray
    mean: float
    variance: float
    residual: float = 0.0


def stationary_numeric(gen: GeneratorMatrix) -> StationaryResult:
    """Solve ``rho Q = 0`` with ``sum(rho) = 1`` by sparse LU.

    One balance equation is replaced by the normalization row.

    Examples
    --------
    >>> from qbd.model import ModelParams, build_generator
    >>> r = stationary_numeric(build_generator(ModelParams(N=1, lam=1.0, mu=1.0)))
    >>> np.round(r.rho, 12).tolist()
    [0.666666666667, 0.333333333333]
    """
    Q = gen.Q
    n = Q.shape[0]
    A = sp.lil_matrix(Q.T)
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        x = spsolve(sp.csc_matrix(A), b)
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("stationary system is singular")
    x = np.where(np.abs(x) < 1e-300, 0.0, x)
    residual = float(np.abs(Q.T @ x).max())
    joint = x.reshape(gen.N + 1, gen.d)
    rho = joint.sum(axis=1)
    k = np.arange(gen.N + 1)
    mean = float(k @ rho)
    var = float((k - mean) ** 2 @ rho)
    return StationaryResult(rho=rho, rho_joint=joint, pi=joint.sum(axis=0), mean=mean,
                            variance=var, residual=residual)


def _a(params):
    return params.xi / (params.lam + params.mu)


def _g_raw(lam, mu, xi, N):
    a = xi / (lam + mu)
    z = -lam / mu
    ln, sn = hyp_series_log((a, -N), (a + N + 1,), z)
    ld, sd = hyp_series_log((a + 1, -N), (a + N + 1,), z)
    return sn * sd * math.exp(ln - ld)


def g_exact(params: ModelParams) -> float:
    """``g = 2F1(a,-N;a+N+1;-lam/mu) / 2F1(a+1,-N;a+N+1;-lam/mu)``, ``a = xi/(lam+mu)``.

    Both series terminate after ``N+1`` positive terms and are summed with a
    running exponent, so large ``N`` does not overflow.
    """
    return _g_raw(params.lam, params.mu, params.xi, params.N)


def _lse(logs):
    logs = [x for x in logs if x != -math.inf]
    if not logs:
        return -math.inf
    m = max(logs)
    return m + math.log(sum(math.exp(x - m) for x in logs))


def _log_binom(n, k):
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def pgf_stationary(params: ModelParams, z: float, g: float | None = None) -> float:
    """Stationary pgf ``F(z) = sum_k z**k rho(k)``.

    For ``z`` away from 0 the two-sum closed form is evaluated with every
    term in log space (all terms of each sum are positive there). When the
    difference of the two sums cancels below ``1e-8`` of their size, which
    happens as ``z -> 0`` because of the ``z**-N`` prefactor, the value is
    taken from the level probabilities of :func:`rho_closed` instead, so the
    ``z**-N`` factor never multiplies a rounded difference.
    """
    if not 0 <= z <= 1:
        raise DomainError("z must lie in [0, 1]")
    N, lam, mu, xi = params.N, params.lam, params.mu, params.xi
    if z == 1:
        return 1.0
    g = _g_raw(lam, mu, xi, N) if g is None else g
    s = lam + mu
    a = xi / s
    if z > 0:
        w = -lam * (1 - z) / (lam * z + mu)
        base = N * math.log(lam * z + mu) - 2 * N * math.log(s) - N * math.log(z)
        lga1 = math.lgamma(a + 1)
        l1 = []
        for j in range(N):
            lf, _ = hyp_series_log((a + 1, -N), (a + j + 2,), w)
            l1.append(_log_binom(N - 1, j) + (N - j - 1) * math.log(s * z) + j * math.log(mu * (1 - z))
                      + math.lgamma(j + 1) + lga1 - math.lgamma(j + a + 2) + lf)
        l2 = []
        for j in range(N + 1):
            lf, _ = hyp_series_log((a, -N), (a + j + 1,), w)
            l2.append(_log_binom(N, j) + (N - j) * math.log(s * z) + j * math.log(mu * (1 - z))
                      + math.lgamma(j + 1) + lga1 - math.lgamma(j + a + 1) + lf)
        L2 = _lse(l2)
        # F = T2 (1 - T1/T2); the ratio stays finite even where T1, T2 overflow
        one_minus = 1.0 - N * mu * (1 - z) * g * math.exp(_lse(l1) - L2)
        if abs(one_minus) >= 1e-8:
            return math.copysign(math.exp(math.log(abs(one_minus)) + L2 + base), one_minus)
    rho = np.array([rho_closed(params, r, g=g) for r in range(N + 1)])
    return float(np.polyval(rho[::-1], z))


def _gamma_ratio(x, y):
    """``Gamma(x) / Gamma(y)`` for positive arguments."""
    return math.exp(math.lgamma(x) - math.lgamma(y))


def rho_closed_general(params: ModelParams, r: int, g: float | None = None) -> float:
    """Closed-form ``rho(r)`` for arbitrary ``lam``, ``mu`` and ``xi > 0``.

    ``r = 0`` uses the 3F2 expression with parameters ``(1/2, -N, N+1)``.
    ``r >= 1`` uses the corrected expression in which the factor
    ``g mu/s`` multiplies the first ``j``-sum (see
    :func:`rho_closed_general_printed` for the uncorrected form).
    Terms alternate in sign, so this is intended for moderate ``N``.
    """
    N, lam, mu, xi = params.N, params.lam, params.mu, params.xi
    if not 0 <= r <= N:
        raise DomainError("r must lie in 0..N")
    s = lam + mu
    a = xi / s
    g = _g_raw(lam, mu, xi, N) if g is None else g
    if r == 0:
        v = 0.0
        if xi > 0:
            v = xi / (xi + N * s) * hyp_3f2(0.5, -N, N + 1, 1 - N - a, 1 + N + a, 4 * lam * mu / s**2)
        S = 0.0
        for j in range(1, N + 1):
            S += (math.comb(N, j) * (-mu / s) ** j * _gamma_ratio(j + 1, j + 1 + a)
                  * hyp_3f2(j, 1 + j, -N, 1, 1 + j + a, lam / s))
        return v - g * math.gamma(a + 1) * S
    S1 = 0.0
    for j in range(N):
        S1 += ((-mu / s) ** j * N * math.comb(N - 1, j) * _gamma_ratio(j + r + 1, 2 + j + r + a)
               * hyp_3f2(j + 1 + r, -N + r, 2 + j + r, 1 + r, 2 + j + r + a, lam / s))
    S2 = 0.0
    for j in range(N + 1):
        S2 += ((-mu / s) ** j * math.comb(N, j) * _gamma_ratio(j + 1 + r, 1 + j + r + a)
               * hyp_3f2(j + 1 + r, 1 + j + r, -N + r, 1 + r, 1 + j + r + a, lam / s))
    return math.gamma(a + 1) * (lam / s) ** r * math.comb(N, r) * (g * mu / s * S1 + S2)


def rho_closed_general_printed(params: ModelParams, r: int, g: float | None = None) -> float:
    """Uncorrected ``rho(r >= 1)``: ``g mu/s`` added to the sums, not multiplying one.

    Reads the undefined symbols as ``n := N`` and ``s := r``. Kept only to
    document the discrepancy against the linear solve.
    """
    if r == 0:
        return rho_closed_general(params, 0, g)
    N, lam, mu, xi = params.N, params.lam, params.mu, params.xi
    s = lam + mu
    a = xi / s
    g = _g_raw(lam, mu, xi, N) if g is None else g
    S1 = sum((-mu / s) ** j * N * math.comb(N - 1, j) * _gamma_ratio(j + r + 1, 2 + j + r + a)
             * hyp_3f2(j + 1 + r, -N + r, 2 + j + r, 1 + r, 2 + j + r + a, lam / s) for j in range(N))
    S2 = sum((-mu / s) ** j * math.comb(N, j) * _gamma_ratio(j + 1 + r, 1 + j + r + a)
             * hyp_3f2(j + 1 + r, 1 + j + r, -N + r, 1 + r, 1 + j + r + a, lam / s) for j in range(N + 1))
    return math.gamma(a + 1) * (lam / s) ** r * math.comb(N, r) * (g * mu / s + S1 + S2)


def rho_closed_eq(mu: float, xi: float, N: int, r: int) -> float:
    """Closed-form ``rho(r)`` when ``lam == mu``, with ``e = xi/(4 mu)``.

    ``rho(0) = 2 / (1 + (1+e)_N / (1/2+e)_N)``; levels ``r >= 1`` use two
    terminating 3F2 series at unit argument. Gamma ratios are rewritten as
    Pochhammer symbols and evaluated in log space.
    """
    if not 0 <= r <= N:
        raise DomainError("r must lie in 0..N")
    e = xi / (4.0 * mu)
    l1, _ = log_pochhammer(1 + e, N)
    lh, _ = log_pochhammer(0.5 + e, N)
    if r == 0:
        return 2.0 / (1.0 + math.exp(l1 - lh))
    # common denominator (1+e)_N + (1/2+e)_N, factored by (1+e)_N
    den = 1.0 + math.exp(lh - l1)
    F1 = hyp_3f2(r - N, 0.5 + r, e, 0.5 - N, r + 1 + e, 1.0)
    F2 = hyp_3f2(r - N, 0.5 + r, e + 0.5, 0.5 - N, r + 0.5 + e, 1.0)
    la, _ = log_pochhammer(1 + r + e, N - r)
    lb, _ = log_pochhammer(0.5 + r + e, N - r)
    pref = _log_binom(2 * N, N - r) + math.lgamma(r + 1) - N * math.log(4.0) - l1
    return math.exp(pref) * (F1 * math.exp(la) + F2 * math.exp(lb)) / den


def rho_closed(params: ModelParams, r: int, g: float | None = None) -> float:
    """Dispatch to the ``lam == mu`` or general closed form."""
    if params.lam == params.mu:
        return rho_closed_eq(params.mu, params.xi, params.N, r)
    return rho_closed_general(params, r, g)


@dataclass(frozen=True)
class MeanVar:
    """Stationary mean and variance with the printed-formula comparison."""

    mean: float
    variance: float
    printed_mean: float
    printed_variance: float
    oracle: str

    @property
    def variance_deviation(self) -> float:
        return self.printed_variance - self.variance


def mean_var_printed(params: ModelParams, g: float | None = None) -> tuple[float, float]:
    """Mean and variance from the closed expressions in ``N``, ``g`` and the rates."""
    N, lam, mu, xi = params.N, params.lam, params.mu, params.xi
    G = _g_raw(lam, mu, xi, N) if g is None else g
    s = lam + mu
    m = N / (s + xi) * (lam + mu * (G - 1))
    v = N / (s + xi) ** 2 * (
        2 * lam * mu * s * (2 - (N + 1) * G) / (2 * s + xi)
        + N * mu**2 * G * (2 * s / (2 * s + xi) - G)
        + xi / (2 * s + xi) * ((1 + N) * (lam**2 + mu**2) - 2 * lam * mu * (N - 3)
                               - mu * (3 * lam + mu) * G + xi * (lam + mu * (1 - G)))
    )
    return m, v


def _richardson(values, hs, order_start=1):
    """Richardson table for a quantity with an error expansion in powers of h (ratio 2)."""
    T = list(values)
    p = order_start
    while len(T) > 1:
        T = [(2**p * T[i + 1] - T[i]) / (2**p - 1) for i in range(len(T) - 1)]
        p += 1
    return T[0]


PGF_DIFF_MAX_N = 200


def mean_var_closed(params: ModelParams, h0: float = 0.2, levels: int = 7) -> MeanVar:
    """Stationary mean and variance, oracle-checked.

    The returned values come from the oracle: Richardson-extrapolated one-
    sided differences of :func:`pgf_stationary` at ``z = 1`` when
    ``N <= 200``, else the sparse linear solve. The printed closed forms are
    returned alongside for the deviation log.
    """
    g = g_exact(params)
    pm, pv = mean_var_printed(params, g)
    if params.N <= PGF_DIFF_MAX_N:
        hs = [h0 / 2**i for i in range(levels)]
        F = {}

        def f(z):
            if z not in F:
                F[z] = pgf_stationary(params, z, g)
            return F[z]

        d1 = [(1.0 - f(1 - h)) / h for h in hs]
        d2 = [(1.0 - 2 * f(1 - h) + f(1 - 2 * h)) / h**2 for h in hs]
        F1 = _richardson(d1, hs)
        F2 = _richardson(d2, hs)
        mean = F1
        var = F2 + F1 - F1**2
        oracle = "pgf-richardson"
    else:
        res = stationary_numeric(build_generator(params.replace(C=np.ones((1, 1)), l0=1)))
        mean, var = res.mean, res.variance
        oracle = "linear-solve"
    return MeanVar(mean=mean, variance=var, printed_mean=pm, printed_variance=pv, oracle=oracle)


def decoupling(params: ModelParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(rho, pi, rho[:,None] * pi)`` for ``lam == mu``."""
    if params.lam != params.mu:
        raise DomainError("the product form is stated for lam == mu")
    rho = np.array([rho_closed_eq(params.mu, params.xi, params.N, r) for r in range(params.N + 1)])
    pi = invariant_phase_distribution(params.C)
    return rho, pi, np.outer(rho, pi)


# --- large-N approximation of g ---------------------------------------------


@dataclass(frozen=True)
class GApproxCoefficients:
    """Coefficients of the rational large-``N`` approximation of ``g``."""

    alpha_lm: float
    gammas: dict = field(default_factory=dict)
    c: tuple = ()
    d: tuple = ()


def _require_lt(lam, mu):
    if not lam < mu:
        raise DomainError(f"requires lambda < mu (got lambda={lam}, mu={mu})")


def g_approx_coefficients(lam: float, mu: float, xi: float) -> GApproxCoefficients:
    """``alpha(lam,mu)``, the eight gamma coefficients, ``c1..c5`` and ``d1..d5``."""
    _require_lt(lam, mu)
    s = lam + mu
    a = xi / s
    A = -math.sqrt(2 * math.log(s * s / (4 * lam * mu)))
    r2 = math.sqrt(2)
    L = lam - mu
    P = (lam * lam - mu * mu) / (A * lam * mu)
    Pa = P**a
    g000 = (lam / mu + 1) * Pa * (A * mu / L)
    g001 = (s - xi) / ((lam * lam - mu * mu) * A) * (
        Pa * (A * A * (4 * lam * mu * s - (lam * lam + mu * mu) * xi) + L * L * xi) / (2 * L * L)
        - 2 ** (0.5 + a) * L / A * (A * s / L) ** a)
    g010 = s**a / A * ((s * A / L) * (L / (A * lam * mu)) ** a - 2 ** (a + 0.5) * (A / L) ** a)
    g011 = 1 / (2 * r2 * A * L**3 * s * s) * (
        (2 * s * A / L) ** a * (2 * L**3 * (s - xi) * (-2 * s + xi) / A**2
                                + L * s * s * (L * L + 2 * s * xi + 2 * xi * xi) / 2)
        + r2 * s * Pa * (A * (s - xi) * (4 * lam * mu * s - (lam * lam + mu * mu) * xi) - L * L * xi * (s + xi) / A))
    g100 = (lam / mu + 1) * Pa
    g101 = xi / (L * A) * (
        (A * A * (lam**3 - 3 * lam * mu * mu + (lam * lam + mu * mu) * (xi - mu)) - L * L * (s + xi))
        / (2 * (lam * lam - mu * mu) * mu * A) * Pa
        + 2 ** (0.5 + a) * (A * s / L) ** a)
    g110 = s ** (a + 1) / A * ((1 / mu) * (L / (A * lam * mu)) ** a - 2 ** (a + 0.5) * (A / L) ** (a + 1))
    g111 = 1 / (2 * A * s) * (
        (A * s / L) ** a / L * (2 ** (0.5 + a) * (s - xi) * xi / A
                                + 2 ** (-1.5 + a) * s * s * A * ((3 * lam + mu) ** 2 + 2 * (5 * lam + mu) * xi + 2 * xi * xi) / L**2)
        - Pa / mu * ((s + xi) * (2 * s + xi) / A**2
                     + xi * (-lam**3 + 3 * lam * mu * mu + (lam * lam + mu * mu) * (mu - xi)) / L**2))
    c5 = -32 * r2 * s**7 * A**7 * (g000 - A * g010)
    c4 = -16 * r2 * s**5 * A**5 * (-xi * (s + xi) * g000 + 2 * s * s * A * A * g001
                                   - A * ((s - xi) * xi * g010 + 2 * s * s * A * A * g011))
    c3 = -4 * r2 * s**3 * xi * A**3 * ((s + xi) * (2 * s + xi) * (3 * s + xi) * g000
                                       - 4 * s * s * (s + xi) * A * A * g001
                                       + A * (s - xi) * ((s + xi) * (2 * s + xi) * g010 - 4 * s * s * A * A * g011))
    c2 = r2 * s * xi * (s + xi) * (2 * s + xi) * A * (
        (3 * s + xi) * (4 * s + xi) * (5 * s + xi) * g000 - 4 * s * s * (3 * s + xi) * A * A * g001
        + (s - xi) * A * ((3 * s + xi) * (4 * s + xi) * g010 - 4 * s * s * A * A * g011))
    c1 = r2 * s * xi * (s + xi) * (2 * s + xi) * (3 * s + xi) * (4 * s + xi) * A * (
        (5 * s + xi) * g001 + A * (s - xi) * g011)
    d5 = 32 * r2 * mu * s**6 * A**6 * (g100 - A * g110)
    d4 = -16 * r2 * mu * s**4 * A**4 * ((s + xi) * (2 * s + xi) * g100 - 2 * s * s * A * A * g101
                                        - A * (xi * (s + xi) * g110 - 2 * s * s * A * A * g111))
    d3 = 4 * r2 * mu * s * s * (s + xi) * A * A * (
        (2 * s + xi) * (3 * s + xi) * (4 * s + xi) * g100 - 4 * s * s * (2 * s + xi) * A * A * g101
        - xi * A * ((2 * s + xi) * (3 * s + xi) * g110 - 4 * s * s * A * A * g111))
    d2 = -r2 * mu * (s + xi) * (2 * s + xi) * (3 * s + xi) * (
        (4 * s + xi) * (5 * s + xi) * (6 * s + xi) * g100 - 4 * s * s * (4 * s + xi) * A * A * g101
        - xi * A * ((4 * s + xi) * (5 * s + xi) * g110 - 4 * s * s * A * A * g111))
    d1 = -r2 * mu * (s + xi) * (2 * s + xi) * (3 * s + xi) * (4 * s + xi) * (5 * s + xi) * (
        (6 * s + xi) * g101 - xi * A * g111)
    gammas = {"000": g000, "001": g001, "010": g010, "011": g011,
              "100": g100, "101": g101, "110": g110, "111": g111}
    return GApproxCoefficients(alpha_lm=A, gammas=gammas, c=(c1, c2, c3, c4, c5), d=(d1, d2, d3, d4, d5))


def g_approx(params: ModelParams) -> float:
    """Rational large-``N`` approximation ``sum c_i N^i / sum d_i N^i`` of ``g`` (``lam < mu``)."""
    co = g_approx_coefficients(params.lam, params.mu, params.xi)
    N = float(params.N)
    num = sum(c * N ** (i + 1) for i, c in enumerate(co.c))
    den = sum(d * N ** (i + 1) for i, d in enumerate(co.d))
    return num / den


def limit_mean(params: ModelParams) -> float:
    """Large-``N`` stationary mean ``lam / (mu - lam)``."""
    _require_lt(params.lam, params.mu)
    return params.lam / (params.mu - params.lam)


def limit_variance(params: ModelParams) -> float:
    """Large-``N`` variance as a rational expression in ``c3..c5`` and ``d3..d5``."""
    lam, mu, xi = params.lam, params.mu, params.xi
    co = g_approx_coefficients(lam, mu, xi)
    _, _, c3, c4, c5 = co.c
    _, _, d3, d4, d5 = co.d
    num = ((d4**2 + 2 * d3 * d5) * xi * (lam - mu) ** 2
           - (2 * c3 * c5 + c4**2) * mu**2 * (2 * lam + 2 * mu + xi)
           - (c5 * d4 + c4 * d5) * mu * (2 * lam + xi) * (lam + mu + xi)
           - (c4 * d4 + c3 * d5 + c5 * d3) * 2 * mu * (lam**2 - mu**2)
           + 2 * d4 * d5 * ((4 * lam * mu + xi**2) * (lam + mu) + lam**2 * xi + mu**2 * xi + 6 * lam * mu * xi))
    return num / (d5**2 * (lam + mu + xi) ** 2 * (2 * lam + 2 * mu + xi))


# --- monotonicity of rho(0) for lam == mu -------------------------------------


@dataclass(frozen=True)
class MonotonicityReport:
    """Largest violation per direction; all zero when every check holds."""

    max_violation_xi: float
    max_violation_lambda: float
    max_violation_N: float
    n_checks: int
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def rho0_monotonicity_scan(mu_grid, xi_grid, N_grid) -> MonotonicityReport:
    """Check that ``rho(0)`` (``lam == mu``) rises with ``xi`` and falls with ``lam`` and ``N``.

    ``mu_grid`` holds the common rate ``lam = mu``. Grid points are evaluated
    in parallel; the report is assembled in grid order.
    """
    mu_grid = sorted(float(m) for m in mu_grid)
    xi_grid = sorted(float(x) for x in xi_grid)
    N_grid = sorted(int(n) for n in N_grid)
    pts = [(m, x, n) for m in mu_grid for x in xi_grid for n in N_grid]
    vals = dict(zip(pts, ordered_map(lambda p: rho_closed_eq(p[0], p[1], p[2], 0), pts)))
    viol = []
    worst = {"xi": 0.0, "lambda": 0.0, "N": 0.0}
    n_checks = 0
    for m in mu_grid:
        for n in N_grid:
            for x0, x1 in zip(xi_grid, xi_grid[1:]):
                n_checks += 1
                dv = vals[(m, x0, n)] - vals[(m, x1, n)]
                if dv >= 0:
                    worst["xi"] = max(worst["xi"], dv)
                    viol.append(("xi", m, x0, n))
    for x in xi_grid:
        for n in N_grid:
            for m0, m1 in zip(mu_grid, mu_grid[1:]):
                n_checks += 1
                dv = vals[(m1, x, n)] - vals[(m0, x, n)]
                if dv >= 0 and x > 0:
                    worst["lambda"] = max(worst["lambda"], dv)
                    viol.append(("lambda", m0, x, n))
        for m in mu_grid:
            for n0, n1 in zip(N_grid, N_grid[1:]):
                n_checks += 1
                dv = vals[(m, x, n1)] - vals[(m, x, n0)]
                if dv >= 0:
                    worst["N"] = max(worst["N"], dv)
                    viol.append(("N", m, x, n0))
    return MonotonicityReport(worst["xi"], worst["lambda"], worst["N"], n_checks, tuple(viol))
