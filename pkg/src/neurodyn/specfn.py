"""Exponential integral, its log-composite and inverse, and the logistic map.

Only positive real arguments of ``Ei`` are supported; the dynamics never
evaluate it elsewhere.
"""
import math

from .errors import ConvergenceError, DomainError

#: Euler-Mascheroni constant to 20 significant digits.
EULER_GAMMA = 0.57721566490153286061

#: Below this point Ei uses its power series, above it the asymptotic series.
EI_SWITCH = 40.0

_LOG_DBL_MAX = 709.78


def _ei_series(x):
    # gamma + ln x + sum_{k>=1} x^k / (k k!); every term is positive for x > 0.
    term = 1.0
    total = 0.0
    k = 0
    while True:
        k += 1
        term *= x / k
        contrib = term / k
        total += contrib
        if contrib <= 1e-17 * total:
            break
    return EULER_GAMMA + math.log(x) + total


def _ei_asymptotic(x):
    # e^x / x * sum_k k! / x^k, truncated at the smallest term.
    total = 1.0
    term = 1.0
    k = 0
    while True:
        k += 1
        nxt = term * k / x
        if nxt >= term or nxt < 1e-17:
            if nxt < term:
                total += nxt
            break
        term = nxt
        total += term
    log_scale = x - math.log(x)
    if log_scale > _LOG_DBL_MAX:
        return math.inf
    return math.exp(log_scale) * total


def ei(x):
    """Exponential integral ``Ei(x) = -int_{-x}^inf e^{-u}/u du`` for ``x > 0``.

    Relative accuracy is better than 1e-10 on ``(0, 50]``. Returns ``inf``
    once the result overflows a double.
    """
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"Ei is only defined here for x > 0, got {x!r}")
    if x <= EI_SWITCH:
        return _ei_series(x)
    return _ei_asymptotic(x)


def log_plus_ei(u):
    """Return ``log(u) + Ei(u)``, a strictly increasing bijection of (0, inf) onto R."""
    u = float(u)
    if not u > 0.0:
        raise DomainError(f"log + Ei requires u > 0, got {u!r}")
    return math.log(u) + ei(u)


def inverse_log_plus_ei(v, max_iter=200):
    """Solve ``log(u) + Ei(u) = v`` for ``u > 0``.

    Works on ``s = log(u)``, where ``g(s) = s + Ei(e^s) - v`` is increasing
    with ``g'(s) = 1 + e^{e^s}``. A sign-change bracket is grown
    geometrically, then Newton steps that leave the bracket are replaced by
    bisection.
    """
    v = float(v)
    if not math.isfinite(v):
        raise DomainError(f"inverse of log + Ei needs a finite value, got {v!r}")

    def g(s):
        return s + ei(math.exp(s)) - v

    # Near 0, log u + Ei(u) ~ 2 log u + gamma; far out, ~ u - log u ... >= log u.
    lo = min(0.0, 0.5 * (v - EULER_GAMMA)) - 1.0
    hi = max(1.0, math.log(max(v, 1.0)) + 1.0)
    width = 1.0
    g_lo = g(lo)
    while g_lo > 0.0:
        lo -= width
        width *= 2.0
        g_lo = g(lo)
    width = 1.0
    g_hi = g(hi)
    while g_hi < 0.0:
        hi += width
        width *= 2.0
        g_hi = g(hi)

    guess = 0.5 * (v - EULER_GAMMA)
    s = guess if lo < guess < hi else 0.5 * (lo + hi)
    dx_old = dx = hi - lo
    for _ in range(max_iter):
        gs = g(s)
        if gs == 0.0:
            return math.exp(s)
        if gs > 0.0:
            hi = s
        else:
            lo = s
        u = math.exp(s)
        deriv = 1.0 + (math.exp(u) if u < 709.0 else math.inf)
        newton = s - gs / deriv
        # Bisect when Newton leaves the bracket or is not halving the steps.
        if not lo < newton < hi or abs(2.0 * gs) > abs(dx_old * deriv):
            dx_old, dx = dx, 0.5 * (hi - lo)
            candidate = lo + dx
        else:
            dx_old, dx = dx, gs / deriv
            candidate = newton
        if abs(candidate - s) <= 1e-15 * max(1.0, abs(s)) or hi - lo <= 1e-15 * max(1.0, abs(s)):
            return math.exp(candidate)
        s = candidate
    raise ConvergenceError(f"inverse of log + Ei did not converge for v={v!r}")


def sigmoid(u):
    """Logistic function, evaluated without overflow for large ``|u|``."""
    if u >= 0.0:
        return 1.0 / (1.0 + math.exp(-u))
    e = math.exp(u)
    return e / (1.0 + e)


def sigmoid_inverse(p):
    """Logit ``log(p / (1 - p))`` for ``0 < p < 1``."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"sigmoid inverse requires 0 < p < 1, got {p!r}")
    return math.log(p) - math.log1p(-p)
