"""Gradient starvation between a frequent and a rare feature.

Class-1 inputs always carry feature ``x1`` and carry ``x2`` with frequency
``lambda``. Writing ``w = alpha x1 + beta x2 + ...`` (unit-norm features)
and ``z`` for the output weight, gradient flow gives

    alpha' = lambda z s(alpha + beta) + (1 - lambda) z s(alpha)
    beta'  = lambda z s(alpha + beta)
    z'     = lambda (alpha + beta) s(alpha + beta) + (1 - lambda) alpha s(alpha)

with ``s(a) = sigma(-z a)``. Training stops at ``t*`` where
``z alpha = log((1 - delta) / delta)``; the confidence on ``x2`` alone is
then bounded by ``sigma(lambda log((1 - delta) / delta))``.
"""
from dataclasses import dataclass
import csv
import math

import numpy as np
from scipy.special import expit

from . import ode
from .errors import DomainError, HorizonError, NonFiniteStateError
from .specfn import sigmoid

STARVATION_STEP = 0.01
TSTAR_TIME_TOL = 1e-8


@dataclass(frozen=True)
class StarvationConfig:
    lam: float
    delta: float
    alpha0: float
    beta0: float
    z0: float
    feature_scale: tuple = (1.0, 1.0)

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise DomainError(f"lambda must lie in [0, 1], got {self.lam!r}")
        if not 0.0 < self.delta < 0.5:
            raise DomainError(f"delta must lie in (0, 0.5), got {self.delta!r}")
        if not self.z0 > 0:
            raise DomainError(f"z0 must be positive, got {self.z0!r}")

    @property
    def target_logit(self):
        return math.log((1.0 - self.delta) / self.delta)


@dataclass(frozen=True)
class StarvationState:
    t: float
    alpha: float
    beta: float
    z: float

    @property
    def conf_both(self):
        return sigmoid(self.z * (self.alpha + self.beta))

    @property
    def conf_x1(self):
        return sigmoid(self.z * self.alpha)

    @property
    def conf_x2(self):
        return sigmoid(self.z * self.beta)


def _check_bound_args(lam, delta):
    if not 0.0 < lam <= 1.0:
        raise DomainError(f"lambda must lie in (0, 1], got {lam!r}")
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta!r}")


def starvation_bound(lam, delta):
    """Upper bound on the confidence for the rare feature alone at ``t*``."""
    _check_bound_args(lam, delta)
    return sigmoid(lam * math.log((1.0 - delta) / delta))


def starvation_bound_relaxed(lam, delta, z_star, alpha0, beta0):
    """Bound valid for any ``beta0 >= 0``; adds ``z* (beta0 - lambda alpha0)`` to the exponent."""
    _check_bound_args(lam, delta)
    if not z_star > 0:
        raise DomainError(f"z_star must be positive, got {z_star!r}")
    return sigmoid(lam * math.log((1.0 - delta) / delta) + z_star * (beta0 - lam * alpha0))


def fair_initialization_bound(lam, delta, init=0.1):
    """Relaxed bound for ``alpha0 = beta0 = init`` assuming ``z* = alpha*``, so ``z* = sqrt(log((1-delta)/delta))``."""
    z_star = math.sqrt(math.log((1.0 - delta) / delta))
    return starvation_bound_relaxed(lam, delta, z_star, init, init)


def applicable_bound(config, z_star):
    """Main bound when ``alpha0 >= beta0 / lambda`` (or ``beta0 < 0``), relaxed bound otherwise."""
    if config.beta0 < 0 or config.beta0 <= config.lam * config.alpha0:
        return starvation_bound(config.lam, config.delta)
    return starvation_bound_relaxed(config.lam, config.delta, z_star, config.alpha0, config.beta0)


def starvation_system(lam, feature_scale=(1.0, 1.0)):
    """Projected flow of ``(alpha, beta, z)``; ``feature_scale`` holds ``|x1|, |x2|``."""
    s1, s2 = (float(v) for v in feature_scale)
    q1, q2 = s1 * s1, s2 * s2
    rest = 1.0 - lam

    def rhs(t, s):
        a, b, z = s
        both = expit(-z * (q1 * a + q2 * b))
        only = expit(-z * q1 * a)
        return np.array([
            lam * z * both + rest * z * only,
            lam * z * both,
            lam * (q1 * a + q2 * b) * both + rest * q1 * a * only,
        ])

    return ode.OdeSystem(3, rhs, f"gradient starvation lambda={lam}", ("alpha", "beta", "z"))


def integrate_starvation(config, t_end, step=STARVATION_STEP):
    """RK4 trajectory of ``(alpha, beta, z)`` with the three confidences appended."""
    system = starvation_system(config.lam, config.feature_scale)
    traj = ode.integrate(system, [config.alpha0, config.beta0, config.z0], t_end, step,
                         system.description)
    a, b, z = traj.column("alpha"), traj.column("beta"), traj.column("z")
    return traj.with_columns(
        ("conf_both", "conf_x1", "conf_x2"),
        (expit(z * (a + b)), expit(z * a), expit(z * b)),
    )


def trajectory_states(traj):
    """Unpack a starvation trajectory into :class:`StarvationState` records."""
    return [StarvationState(float(t), *map(float, row[:3])) for t, row in zip(traj.times, traj.states)]


def integrate_to_tstar(config, step=STARVATION_STEP, t_max=1e5):
    """Integrate until ``z alpha`` first reaches the target logit.

    The crossing is bracketed by two RK4 steps and refined by bisection on a
    partial RK4 step from the bracket start, to ``TSTAR_TIME_TOL`` in time.

    Raises
    ------
    HorizonError
        If the target is not reached by ``t_max``.
    """
    target = config.target_logit
    rhs = starvation_system(config.lam, config.feature_scale).rhs
    x = np.array([config.alpha0, config.beta0, config.z0], dtype=float)

    def excess(s):
        return s[2] * s[0] - target

    if excess(x) >= 0:
        raise DomainError("the confidence target already holds at t = 0")
    t = 0.0
    while True:
        if t >= t_max:
            raise HorizonError(f"z alpha did not reach {target:.6g} by t={t_max}")
        nxt = ode.rk4_step(rhs, t, x, step)
        if not np.all(np.isfinite(nxt)):
            raise NonFiniteStateError("starvation state became non-finite before t*")
        if excess(nxt) >= 0:
            break
        t, x = t + step, nxt
    lo, hi = 0.0, step
    while hi - lo > TSTAR_TIME_TOL:
        mid = 0.5 * (lo + hi)
        if excess(ode.rk4_step(rhs, t, x, mid)) >= 0:
            hi = mid
        else:
            lo = mid
    final = ode.rk4_step(rhs, t, x, hi)
    return t + hi, StarvationState(t + hi, *map(float, final))


@dataclass(frozen=True)
class BoundRow:
    lam: float
    delta: float
    bound: float
    bound_relaxed: float
    conf_x2_at_tstar: float


def bound_surface(lams, deltas, alpha0=0.1, beta0=0.1, z0=0.1, step=STARVATION_STEP):
    """Bounds and the integrated rare-feature confidence over a ``(lambda, delta)`` grid."""
    rows = []
    for lam in lams:
        for delta in deltas:
            cfg = StarvationConfig(lam, delta, alpha0, beta0, z0)
            _, state = integrate_to_tstar(cfg, step)
            rows.append(BoundRow(
                lam, delta, starvation_bound(lam, delta),
                starvation_bound_relaxed(lam, delta, state.z, alpha0, beta0),
                state.conf_x2,
            ))
    return rows


#: Confidence bounds reported for 1 - delta = 99% and 99.99% at each lambda.
TABLE1_LAMBDAS = (0.5, 0.2, 0.1, 0.01)
TABLE1_DELTAS = (1e-2, 1e-4)


def table1():
    """Rows ``(delta, lambda, bound)`` for the reference lambda/delta table."""
    return [(d, lam, starvation_bound(lam, d)) for d in TABLE1_DELTAS for lam in TABLE1_LAMBDAS]


def write_bound_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "delta", "bound", "bound_relaxed", "conf_x2_at_tstar"])
        for r in rows:
            writer.writerow([repr(r.lam), repr(r.delta), repr(r.bound), repr(r.bound_relaxed),
                             repr(r.conf_x2_at_tstar)])
    return len(rows)
