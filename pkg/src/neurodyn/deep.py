"""Logit dynamics of an ``N``-layer ReLU network under aligned initialization.

With every per-layer scalar starting at ``y0 / |x|`` they stay equal and the
logit obeys ``u' = N |x|^{2/N} u^{2 - 2/N} / (1 + e^u)``.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.special import expit

from . import ode
from .errors import DomainError, HorizonError

DEEP_STEP = 1e-3
_TINY = 1e-300


@dataclass(frozen=True)
class DeepConfig:
    depth_n: int
    norm: float
    u0: float

    def __post_init__(self):
        if int(self.depth_n) != self.depth_n or self.depth_n < 2:
            raise DomainError(f"depth must be an integer >= 2, got {self.depth_n!r}")
        if not self.norm > 0:
            raise DomainError(f"input norm must be positive, got {self.norm!r}")
        if not self.u0 > 0:
            raise DomainError(f"initial logit must be positive (0 is a fixed point), got {self.u0!r}")


def aligned_initial_logit(z0, norm, depth_n):
    """Initial logit ``norm * z0^N`` when every layer scalar equals ``z0``."""
    if not z0 > 0:
        raise DomainError(f"z0 must be positive, got {z0!r}")
    return norm * z0 ** depth_n


def deep_logit_system(depth_n, norm):
    coef = depth_n * norm ** (2.0 / depth_n)
    power = 2.0 - 2.0 / depth_n

    def rhs(t, u):
        safe = np.maximum(u, _TINY)
        return coef * np.exp(power * np.log(safe)) * expit(-u)

    return ode.OdeSystem(1, rhs, f"deep logit N={depth_n}", ("u",))


def solve_deep_logit(config, t_end, step=DEEP_STEP):
    """Integrate the depth-``N`` logit ODE from ``config.u0`` with RK4."""
    system = deep_logit_system(config.depth_n, config.norm)
    traj = ode.integrate(system, [config.u0], t_end, step, system.description)
    return traj.with_columns(("confidence",), (expit(traj.column("u")),))


def per_layer_system(depth_n, norm):
    """Full per-layer flow of ``(z, z^1, ..., z^{N-2}, y)`` for a class-1 point.

    Each scalar's derivative is the product of all the others times
    ``sigma(-u)`` (with an extra ``|x|^2`` for ``y``), where ``u`` is the
    product of all of them.
    """
    if depth_n < 2:
        raise DomainError("depth must be at least 2")
    n2 = norm * norm
    m = depth_n  # z, N-2 hidden scalars, y

    def rhs(t, s):
        u = np.prod(s)
        g = expit(-u)
        out = np.empty(m)
        for i in range(m):
            out[i] = np.prod(np.delete(s, i)) * g
        out[-1] *= n2
        return out

    names = ("z",) + tuple(f"z{i}" for i in range(1, depth_n - 1)) + ("y",)
    return ode.OdeSystem(m, rhs, f"per-layer N={depth_n}", names)


def aligned_per_layer_start(z0, norm, depth_n):
    """Aligned start: every layer scalar ``z0`` and ``y0 = norm z0``."""
    return np.array([z0] * (depth_n - 1) + [norm * z0])


def time_to_deep_logit(config, target, step=DEEP_STEP, t_max=1e5):
    """First time the depth-``N`` logit reaches ``target`` (linear interpolation between steps)."""
    if target <= config.u0:
        return 0.0
    system = deep_logit_system(config.depth_n, config.norm)
    t, u = 0.0, np.array([config.u0])
    while t < t_max:
        nxt = ode.rk4_step(system.rhs, t, u, step)
        if nxt[0] >= target:
            frac = (target - u[0]) / (nxt[0] - u[0])
            return t + frac * step
        t, u = t + step, nxt
    raise HorizonError(f"logit {target} not reached before t={t_max}")
