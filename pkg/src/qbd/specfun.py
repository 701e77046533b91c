"""Special-function kernels: hypergeometric series, Hermite functions, Gamma.

All routines work in double precision. Hypergeometric series keep a running
binary exponent so that large intermediate sums do not overflow, and add
terms with Neumaier compensation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, NoConvergence, PoleError

__all__ = [
    "SeriesControl",
    "DEFAULT_CONTROL",
    "is_nonpositive_integer",
    "lgamma_sign",
    "rgamma",
    "log_pochhammer",
    "pochhammer",
    "hyp_series",
    "hyp_series_log",
    "gauss_2f1",
    "hyp_3f2",
    "hyp_1f1",
    "hermite_h",
    "hermite_h_log",
    "upper_gamma",
    "upper_gamma_scaled_sequence",
    "erf_erfc",
]

_SCALE_BITS = 600
_SCALE_UP = 2.0**_SCALE_BITS
_SCALE_DOWN = 2.0**-_SCALE_BITS


@dataclass(frozen=True)
class SeriesControl:
    """Truncation controls for infinite series.

    Parameters
    ----------
    rel_tol : float
        Stop once two consecutive terms are below ``rel_tol`` times the
        partial sum.
    max_terms : int
        Hard cap on the number of terms of a non-terminating series.
    int_tol : float
        A parameter ``p`` counts as a nonpositive integer when
        ``|p - round(p)| < int_tol`` and ``round(p) <= 0``.
    """

    rel_tol: float = 1e-14
    max_terms: int = 100_000
    int_tol: float = 1e-9

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")


DEFAULT_CONTROL = SeriesControl()


def is_nonpositive_integer(p: float, tol: float = DEFAULT_CONTROL.int_tol) -> bool:
    r = round(p)
    return r <= 0 and abs(p - r) < tol


def lgamma_sign(x: float) -> tuple[float, int]:
    """Return ``(log|Gamma(x)|, sign Gamma(x))``; raises PoleError at poles."""
    if x <= 0 and x == math.floor(x):
        raise PoleError(f"Gamma has a pole at {x}")
    if x > 0:
        return math.lgamma(x), 1
    # Gamma alternates sign on (-n-1, -n)
    sign = -1 if math.floor(-x) % 2 == 0 else 1
    return math.lgamma(x), sign


def rgamma(x: float) -> float:
    """Reciprocal Gamma, exactly zero at the poles."""
    if x <= 0 and x == math.floor(x):
        return 0.0
    if 0 < x < 171:
        return 1.0 / math.gamma(x)
    lg, s = lgamma_sign(x)
    return s * math.exp(-lg)


def log_pochhammer(a: float, n: int) -> tuple[float, int]:
    """``(log|(a)_n|, sign)``; sign 0 means the product is exactly zero."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    if n == 0:
        return 0.0, 1
    if a <= 0 and a == math.floor(a) and -a < n:
        return -math.inf, 0
    if a > 0:
        return math.lgamma(a + n) - math.lgamma(a), 1
    la, sa = lgamma_sign(a)
    lb, sb = lgamma_sign(a + n)
    return lb - la, sa * sb


def pochhammer(a: float, n: int) -> float:
    """Rising factorial ``a (a+1) ... (a+n-1)``.

    Small cases are multiplied out directly; larger ones go through
    :func:`log_pochhammer`.

    Examples
    --------
    >>> pochhammer(0.5, 3)
    1.875
    """
    if n < 0:
        raise DomainError("n must be nonnegative")
    if n <= 64:
        p = 1.0
        for k in range(n):
            p *= a + k
        if math.isfinite(p):
            return p
    lg, s = log_pochhammer(a, n)
    if s == 0:
        return 0.0
    return s * math.exp(lg) if lg < 709.7 else s * math.inf


def _termination(num, ctl):
    ms = [-round(p) for p in num if is_nonpositive_integer(p, ctl.int_tol)]
    return min(ms) if ms else None


def _series_scaled(num, den, z, ctl):
    """Sum ``pFq(num; den; z)``; returns ``(mantissa, exponent2)``.

    The value is ``mantissa * 2**exponent2``.
    """
    m = _termination(num, ctl)
    if m is None:
        for b in den:
            if is_nonpositive_integer(b, ctl.int_tol):
                raise PoleError(f"denominator parameter {b} is a nonpositive integer")
        limit = ctl.max_terms
    else:
        for b in den:
            if is_nonpositive_integer(b, ctl.int_tol) and -round(b) < m:
                raise PoleError(f"denominator parameter {b} vanishes before termination at {m}")
        limit = m
    s = 1.0
    c = 0.0
    t = 1.0
    e2 = 0
    small = 0
    k = 0
    while k < limit:
        r = z / (k + 1)
        for a in num:
            r *= a + k
        for b in den:
            r /= b + k
        t *= r
        k += 1
        # Neumaier compensated add
        u = s + t
        if abs(s) >= abs(t):
            c += (s - u) + t
        else:
            c += (t - u) + s
        s = u
        if abs(s) > _SCALE_UP or abs(t) > _SCALE_UP:
            s *= _SCALE_DOWN
            c *= _SCALE_DOWN
            t *= _SCALE_DOWN
            e2 += _SCALE_BITS
        if m is None:
            if t == 0.0:
                break
            if abs(t) <= ctl.rel_tol * abs(s + c):
                small += 1
                if small >= 2:
                    break
            else:
                small = 0
    else:
        if m is None:
            raise NoConvergence(f"series did not converge in {ctl.max_terms} terms")
    return s + c, e2


def hyp_series(num, den, z, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Generalized hypergeometric series ``pFq(num; den; z)`` as a float.

    A numerator that is a nonpositive integer ``-m`` truncates the sum to
    exactly ``m + 1`` terms (the smallest such ``m`` when there are several).
    """
    v, e2 = _series_scaled(tuple(num), tuple(den), z, ctl)
    if e2 == 0:
        return v
    try:
        return math.ldexp(v, e2)
    except OverflowError:
        return math.copysign(math.inf, v)


def hyp_series_log(num, den, z, ctl: SeriesControl = DEFAULT_CONTROL) -> tuple[float, int]:
    """Return ``(log|pFq|, sign)`` of the same series, immune to overflow."""
    v, e2 = _series_scaled(tuple(num), tuple(den), z, ctl)
    if v == 0.0:
        return -math.inf, 0
    return math.log(abs(v)) + e2 * math.log(2.0), (1 if v > 0 else -1)


def gauss_2f1(a, b, c, z, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Gauss hypergeometric function by direct series.

    Parameters
    ----------
    a, b, c, z : float
        Parameters and argument. If ``a`` or ``b`` is a nonpositive integer
        the sum terminates and any ``z`` is allowed; otherwise ``|z| < 1``.

    Raises
    ------
    PoleError
        ``c`` reaches a nonpositive integer before the sum terminates.
    DomainError
        Non-terminating series with ``|z| >= 1``.
    """
    if _termination((a, b), ctl) is None and abs(z) >= 1:
        raise DomainError("non-terminating 2F1 requires |z| < 1")
    return hyp_series((a, b), (c,), z, ctl)


def hyp_3f2(g1, g2, g3, d1, d2, z, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Generalized hypergeometric 3F2 with the same rules as :func:`gauss_2f1`.

    At ``|z| = 1`` a non-terminating series is accepted only when
    ``d1 + d2 - g1 - g2 - g3 > 0``.
    """
    if _termination((g1, g2, g3), ctl) is None:
        if abs(z) > 1:
            raise DomainError("non-terminating 3F2 requires |z| <= 1")
        if abs(z) == 1 and not d1 + d2 - g1 - g2 - g3 > 0:
            raise DomainError("3F2 at |z|=1 diverges for these parameters")
    return hyp_series((g1, g2, g3), (d1, d2), z, ctl)


def hyp_1f1(a, b, z, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Confluent hypergeometric 1F1 (Kummer's function M).

    For ``z < 0`` and a non-terminating series the Kummer transform
    ``M(a,b,z) = e^z M(b-a,b,-z)`` is applied so the summed terms share a
    sign.
    """
    if z < 0 and _termination((a,), ctl) is None:
        return math.exp(z) * hyp_series((b - a,), (b,), -z, ctl)
    return hyp_series((a,), (b,), z, ctl)


def _hyp_1f1_log(a, b, z, ctl):
    if z < 0 and _termination((a,), ctl) is None:
        lg, s = hyp_series_log((b - a,), (b,), -z, ctl)
        return lg + z, s
    return hyp_series_log((a,), (b,), z, ctl)


def _logsumexp_signed(parts):
    parts = [(lg, s) for lg, s in parts if s != 0]
    if not parts:
        return -math.inf, 0
    top = max(lg for lg, _ in parts)
    acc = sum(s * math.exp(lg - top) for lg, s in parts)
    if acc == 0.0:
        return -math.inf, 0
    return top + math.log(abs(acc)), (1 if acc > 0 else -1)


_HALF_LOG_PI = 0.5 * math.log(math.pi)


def _log_rgamma(x):
    """``(log|1/Gamma(x)|, sign)``; sign 0 at the poles ``x = 0, -1, ...``."""
    if x <= 0 and x == math.floor(x):
        return -math.inf, 0
    sign = -1 if x < 0 and math.floor(x) % 2 else 1
    return -math.lgamma(x), sign


def _hermite_definition_log(nu, z, ctl):
    # reciprocal gammas stay in log form: 1/Gamma((1-nu)/2) underflows for nu << 0
    parts = []
    lr1, s1 = _log_rgamma((1 - nu) / 2)
    if s1:
        lg, s = _hyp_1f1_log(-nu / 2, 0.5, z * z, ctl)
        parts.append((lg + lr1, s * s1))
    lr2, s2 = _log_rgamma(-nu / 2)
    if s2 and z != 0.0:
        lg, s = _hyp_1f1_log((1 - nu) / 2, 1.5, z * z, ctl)
        sc = -1 if (z > 0) == (s2 > 0) else 1
        parts.append((lg + math.log(2.0) + math.log(abs(z)) + lr2, s * sc))
    lg, s = _logsumexp_signed(parts)
    return lg + nu * math.log(2.0) + _HALF_LOG_PI, s


def _u_asymptotic(a, x):
    """Large-``x`` expansion of ``U(a, 1/2, x)`` and its ``x``-derivative.

    Returns ``(U, dU/dx)`` or ``None`` when the expansion does not reach
    double precision before its terms start to grow.
    """
    t = 1.0
    s = 1.0
    ds = -a  # coefficient sum for d/dx of x^{-a-k}, times x
    prev = math.inf
    for k in range(0, 400):
        nt = t * (a + k) * (a + 0.5 + k) / ((k + 1) * -x)
        if abs(nt) >= abs(prev) and k > 2:
            return None
        prev = nt
        s += nt
        ds += nt * (-a - k - 1)
        t = nt
        if abs(nt) < 1e-17 * abs(s) or nt == 0.0:
            xa = x ** (-a)
            return xa * s, xa * ds / x
    return None


def _hermite_recessive(nu, z):
    """H(nu, z) for z > 0 via U asymptotics at large z and backward Taylor steps."""
    a = -nu / 2.0
    z0 = max(z, 6.0 + math.sqrt(abs(a)))
    while True:
        res = _u_asymptotic(a, z0 * z0)
        if res is not None:
            break
        z0 *= 1.5
    U, dU = res
    scale = 2.0**nu
    y = scale * U
    yp = scale * dU * 2.0 * z0
    zc = z0
    while zc > z:
        h = -min(zc - z, 0.5 / zc)
        # Taylor coefficients of y'' = 2 z y' - 2 nu y about zc
        c0, c1 = y, yp
        ynew = c0 + c1 * h
        ypnew = c1
        hk = h
        k = 0
        while True:
            c2 = (2.0 * zc * (k + 1) * c1 + 2.0 * (k - nu) * c0) / ((k + 2) * (k + 1))
            hk *= h
            ynew += c2 * hk
            ypnew += (k + 2) * c2 * hk / h
            if abs(c2 * hk) <= 1e-18 * abs(ynew) and k > 4:
                break
            c0, c1 = c1, c2
            k += 1
            if k > 500:
                raise NoConvergence("Taylor step for H(nu,z) did not converge")
        y, yp = ynew, ypnew
        zc += h
    return y


_RECESSIVE_SWITCH = 1.5


def hermite_h_log(nu: float, z: float, ctl: SeriesControl = DEFAULT_CONTROL) -> tuple[float, int]:
    """``(log|H(nu,z)|, sign)`` for the Hermite function.

    For ``z <= 1.5`` this is the two-term confluent definition evaluated in
    log space. For larger ``z`` and non-integer ``nu`` the two terms cancel
    to many digits, so the identity ``H(nu,z) = 2**nu U(-nu/2, 1/2, z**2)``
    is used instead: the asymptotic expansion of ``U`` at a large abscissa,
    then Taylor steps of the Hermite equation back down to ``z``.
    """
    integer_nu = nu >= 0 and nu == math.floor(nu)
    if z <= _RECESSIVE_SWITCH or integer_nu:
        return _hermite_definition_log(nu, z, ctl)
    v = _hermite_recessive(nu, z)
    if v == 0.0:
        return -math.inf, 0
    return math.log(abs(v)), (1 if v > 0 else -1)


def hermite_h(nu: float, z: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Hermite function ``H(nu, z)``.

    ``H(nu,z) = 2**nu sqrt(pi) [M(-nu/2,1/2,z^2)/Gamma((1-nu)/2)
    - 2z M((1-nu)/2,3/2,z^2)/Gamma(-nu/2)]``, with a reciprocal Gamma of
    zero at its poles, so nonnegative integer ``nu`` gives the physicists'
    Hermite polynomials.

    Examples
    --------
    >>> round(hermite_h(2, 2.0), 12)
    14.0
    """
    lg, s = hermite_h_log(nu, z, ctl)
    return 0.0 if s == 0 else s * math.exp(lg)


def _e1_small(x):
    # exponential integral E1 = Gamma(0,x) for 0 < x <= 2
    euler = 0.5772156649015329
    s = 0.0
    t = 1.0
    for k in range(1, 200):
        t *= -x / k
        term = -t / k
        s += term
        if abs(term) < 1e-17 * abs(s):
            break
    return -euler - math.log(x) + s


def _zeta_int(k):
    # Riemann zeta at integer k >= 2, Euler-Maclaurin tail at M = 20
    if k == 2:
        return math.pi**2 / 6
    if k == 3:
        return 1.2020569031595942
    m = 20
    s = sum(n**-k for n in range(1, m))
    return (s + m ** (1 - k) / (k - 1) + 0.5 * m**-k + k * m ** (-k - 1) / 12
            - k * (k + 1) * (k + 2) * m ** (-k - 3) / 720)


_LGAMMA1P_COEF = [(-1) ** k * _zeta_int(k) / k for k in range(2, 64)]


def _lgamma1p(f):
    # log Gamma(1+f) for |f| <= 1/2 without forming 1+f
    s = 0.0
    p = f
    for c in _LGAMMA1P_COEF:
        p *= f
        s += c * p
        if abs(c * p) < 1e-18 * max(abs(s), 1e-300):
            break
    return -0.5772156649015329 * f + s


def _upper_gamma_small_a(f, x):
    # Gamma(f, x) for 0 < f <= 1/2, 0 < x <= 2, written as
    # [Gamma(1+f) - x^f] / f - sum_{k>=1} (-x)^k x^f / (k! (f+k))
    lx = math.log(x)
    head = (math.expm1(_lgamma1p(f)) - math.expm1(f * lx)) / f
    t = 1.0
    s = 0.0
    for k in range(1, 200):
        t *= -x / k
        term = t / (f + k)
        s += term
        if abs(term) < 1e-17 * abs(s):
            break
    return head - math.exp(f * lx) * s


def _lower_gamma_series(a, x):
    # gamma(a, x) for a > 0
    t = 1.0 / a
    s = t
    for k in range(1, 1000):
        t *= x / (a + k)
        s += t
        if t < 1e-17 * s:
            break
    return s * math.exp(a * math.log(x) - x)


def _upper_gamma_cf(a, x):
    return math.exp(a * math.log(x) - x) * _upper_gamma_cf_factor(a, x)


def _upper_gamma_cf_factor(a, x):
    # Legendre continued fraction, modified Lentz; Gamma(a,x) = x^a e^-x * factor
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    f = d
    for i in range(1, 20000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            return f
    raise NoConvergence("continued fraction for Gamma(a,x) did not converge")


def upper_gamma(a: float, x: float) -> float:
    """Upper incomplete Gamma function ``Gamma(a, x)`` for real ``a`` and ``x > 0``.

    For ``x <= 2`` the value is reached by the recurrence
    ``Gamma(a,x) = [Gamma(a+1,x) - x**a e**-x] / a`` from a base case:
    ``Gamma(1/2,x) = sqrt(pi) erfc(sqrt(x))`` for half-integers,
    ``e**-x`` or ``E1(x)`` for integers, and the lower-gamma series
    otherwise. For ``x > 2`` the downward recurrence amplifies rounding by
    roughly ``x**n / n!``, so the Legendre continued fraction is used.
    """
    if not x > 0:
        raise DomainError("upper_gamma requires x > 0")
    if x > 2.0:
        return _upper_gamma_cf(a, x)
    if a - math.floor(a) in (0.0, 1.0):
        # fractional part lost to rounding; Gamma(a, x) is continuous in a
        a = float(round(a))
    n_half = a - 0.5
    if n_half == math.floor(n_half):
        a0 = 0.5
        g = math.sqrt(math.pi) * math.erfc(math.sqrt(x))
    elif a == math.floor(a):
        if a >= 1:
            a0 = 1.0
            g = math.exp(-x)
        else:
            a0 = 0.0
            g = _e1_small(x)
    else:
        a0 = a - math.floor(a)
        if a0 <= 0.5:
            g = _upper_gamma_small_a(a0, x)
        else:
            g = math.gamma(a0) - _lower_gamma_series(a0, x)
    ex = math.exp(-x)
    lx = math.log(x)
    while a0 < a - 1e-12:
        g = a0 * g + math.exp(a0 * lx) * ex
        a0 += 1.0
    while a0 > a + 1e-12:
        a0 -= 1.0
        g = (g - math.exp(a0 * lx) * ex) / a0
    return g


def upper_gamma_scaled_sequence(a0: float, n: int, x: float, prev: float | None = None) -> list[float]:
    """``f_i = x**-(a0-i) * Gamma(a0-i, x)`` for ``i = 0..n-1``.

    The scaling keeps the values finite where ``Gamma(a, x)`` itself would
    under- or overflow (``x -> 0`` with very negative ``a``, or large ``x``).
    ``x = 0`` is allowed when every ``a0 - i`` is negative, giving the limit
    ``-1/(a0-i)``. For ``0 < x <= 2`` the scaled form of the downward
    recurrence ``f(a) = [x f(a+1) - e**-x] / a`` is used; beyond that each
    entry comes from the continued fraction. ``prev``, the value at
    ``a0 + 1``, continues an earlier sequence without restarting it.
    """
    if x < 0:
        raise DomainError("x must be nonnegative")
    if x == 0:
        if a0 >= 0:
            raise DomainError("x = 0 needs negative a")
        return [-1.0 / (a0 - i) for i in range(n)]
    out = []
    if x > 2.0:
        for i in range(n):
            out.append(math.exp(-x) * _upper_gamma_cf_factor(a0 - i, x))
        return out
    ex = math.exp(-x)
    if prev is None:
        f = math.exp(-a0 * math.log(x)) * upper_gamma(a0, x)
    else:
        f = (x * prev - ex) / a0
    out.append(f)
    for i in range(1, n):
        a = a0 - i
        f = (x * f - ex) / a
        out.append(f)
    return out


def erf_erfc(x: float) -> tuple[float, float]:
    """``(erf(x), erfc(x))`` from the standard library."""
    return math.erf(x), math.erfc(x)
