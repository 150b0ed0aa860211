"""Continuous-time dynamics of a two-layer ReLU classifier under binary cross-entropy.

A class made of one repeated point ``x`` is described by ``y = w.x`` and the
output weight ``z``. Gradient flow gives

    y' = |x|^2 z sigma(-yz),    z' = y sigma(-yz),

which conserves ``y^2 - |x|^2 z^2``. On the degenerate hyperbola the logit
``u = yz`` obeys ``u' = 2 |x| u sigma(-u)`` and has a closed form through the
exponential integral; off it the flow is integrated in a hyperbolic angle.
Sampling the class with frequency ``p`` rescales time by ``p``.
"""
from dataclasses import dataclass
from enum import Enum
import math

import numpy as np
from scipy.special import expit

from . import ode
from .errors import DomainError, RegionError
from .phase import RegionKind, classify
from .specfn import ei, inverse_log_plus_ei, log_plus_ei, sigmoid, sigmoid_inverse

#: Relative threshold on ``|y^2 - |x|^2 z^2| / (y^2 + |x|^2 z^2)`` below which c = 0.
DEGENERATE_RTOL = 1e-12

#: Step used when a closed form is unavailable and RK4 fills in.
SOLVER_STEP = 1e-3


class Branch(Enum):
    DEGENERATE = "degenerate"
    ABOVE_ASYMPTOTE = "above"
    BELOW_ASYMPTOTE = "below"


@dataclass(frozen=True)
class ClassSpec:
    """One class of the two-class problem: input norm, sampling frequency, label."""

    norm: float
    frequency: float
    label: int = 1

    def __post_init__(self):
        if not self.norm > 0:
            raise DomainError(f"class input norm must be positive, got {self.norm!r}")
        if not 0.0 <= self.frequency <= 1.0:
            raise DomainError(f"class frequency must lie in [0, 1], got {self.frequency!r}")
        if self.label not in (1, 2):
            raise DomainError(f"class label must be 1 or 2, got {self.label!r}")

    @property
    def rate(self):
        """Effective logit rate ``norm * frequency``."""
        return self.norm * self.frequency


def hyperbolic_invariant(y, z, norm):
    """``|y^2 - norm^2 z^2|`` computed in factored form to limit cancellation."""
    return abs((y - norm * z) * (y + norm * z))


@dataclass(frozen=True)
class ScalarState:
    """Per-mode pair ``(y, z)`` with its conserved invariant and branch."""

    y: float
    z: float
    norm: float
    c: float
    branch: Branch

    @classmethod
    def from_yz(cls, y, z, norm):
        if not norm > 0:
            raise DomainError(f"input norm must be positive, got {norm!r}")
        y, z, norm = float(y), float(z), float(norm)
        c = hyperbolic_invariant(y, z, norm)
        scale = y * y + norm * norm * z * z
        if c <= DEGENERATE_RTOL * scale:
            branch = Branch.DEGENERATE
        elif abs(y) > norm * abs(z):
            branch = Branch.ABOVE_ASYMPTOTE
        else:
            branch = Branch.BELOW_ASYMPTOTE
        return cls(y, z, norm, c, branch)

    @property
    def logit(self):
        return self.y * self.z

    @property
    def signed_invariant(self):
        return self.y * self.y - self.norm * self.norm * self.z * self.z


@dataclass(frozen=True)
class LogitPoint:
    """Logit of a class at rescaled time ``t`` and the probability of the correct label."""

    t: float
    u: float
    p_correct: float


# -- ODE systems ---------------------------------------------------------


def bce_system(norm, label=1):
    """Gradient flow of ``(y, z)`` for a class-1 or class-2 point of norm ``norm``.

    The class-2 system is the class-1 system with ``z`` mirrored.
    """
    n2 = float(norm) ** 2
    if label == 1:
        def rhs(t, s):
            g = expit(-s[0] * s[1])
            return np.array([n2 * s[1] * g, s[0] * g])
    elif label == 2:
        def rhs(t, s):
            g = expit(s[0] * s[1])
            return np.array([-n2 * s[1] * g, -s[0] * g])
    else:
        raise DomainError(f"label must be 1 or 2, got {label!r}")
    return ode.OdeSystem(2, rhs, f"bce class {label}, |x|={norm}", ("y", "z"))


def bce_ensemble_system(norms):
    """Independent class-1 flows stacked as ``(y_1 .. y_k, z_1 .. z_k)``.

    Integrating many initializations as one vector state is much faster
    than looping over scalar runs and gives identical per-run RK4 updates.
    """
    n2 = np.asarray(norms, dtype=float).reshape(-1) ** 2
    k = n2.size

    def rhs(t, s):
        y, z = s[:k], s[k:]
        g = expit(-y * z)
        return np.concatenate([n2 * z * g, y * g])

    names = tuple(f"y{i + 1}" for i in range(k)) + tuple(f"z{i + 1}" for i in range(k))
    return ode.OdeSystem(2 * k, rhs, f"{k} independent bce flows", names)


def logit_system(rate, direction=1.0):
    """``u' = 2 direction rate u sigma(-u)``; ``direction=-1`` is the top-left flow."""
    k = 2.0 * direction * rate

    def rhs(t, u):
        return k * u * expit(-u)

    return ode.OdeSystem(1, rhs, f"logit ode rate={rate}", ("u",))


# -- degenerate closed form ----------------------------------------------


def _require_positive(name, value):
    if not value > 0:
        raise DomainError(f"{name} must be positive, got {value!r}")


def solve_degenerate(u0, rate, t):
    """Logit at time ``t`` on the degenerate hyperbola (c = 0).

    ``u(t) = (log + Ei)^{-1}(2 rate t + log u0 + Ei(u0))`` with
    ``rate = |x| p``.
    """
    _require_positive("u0", u0)
    _require_positive("rate", rate)
    if t < 0:
        raise DomainError(f"time must be non-negative, got {t!r}")
    if t == 0:
        return float(u0)
    return inverse_log_plus_ei(2.0 * rate * t + log_plus_ei(u0))


def time_to_logit(u0, uf, rate):
    """Time for the degenerate logit to grow from ``u0`` to ``uf``."""
    _require_positive("u0", u0)
    _require_positive("rate", rate)
    if uf < u0:
        raise DomainError(f"target logit {uf!r} is below the start {u0!r}")
    if uf == u0:
        return 0.0
    return (math.log(uf / u0) + ei(uf) - ei(u0)) / (2.0 * rate)


def degenerate_logits(u0, rate, times, label=1):
    """Closed-form logit curve as :class:`LogitPoint` records.

    For ``label=2``, ``u0`` is the (negative) class-2 start ``v0`` and the
    curve is the mirror image of the class-1 one.
    """
    if label == 1:
        out = []
        for t in times:
            u = solve_degenerate(u0, rate, t)
            out.append(LogitPoint(float(t), u, sigmoid(u)))
        return out
    if label == 2:
        if not u0 < 0:
            raise DomainError(f"class-2 logits start negative, got {u0!r}")
        out = []
        for t in times:
            v = -solve_degenerate(-u0, rate, t)
            out.append(LogitPoint(float(t), v, sigmoid(-v)))
        return out
    raise DomainError(f"label must be 1 or 2, got {label!r}")


def convergence_bound(u0, norm, t):
    """Upper bound ``2 log(norm t + e^{u0/2})`` on the degenerate logit."""
    return 2.0 * math.log(norm * t + math.exp(0.5 * u0))


def convergence_time_ratio(class1, class2, u0, v0_abs, delta):
    """Ratio ``t2* / t1*`` of the times both classes need to reach confidence ``1 - delta``.

    Returns ``(exact, approx)``. The exact ratio accounts for class 2
    starting further along the same curve (``|v0| >= u0``); the
    approximation is ``(|x1| / |x2|) (p / (1 - p))``.
    """
    _require_positive("u0", u0)
    if u0 > v0_abs:
        raise DomainError("the time ratio is only defined for u0 <= |v0|")
    if not 0.0 < delta < 0.5:
        raise DomainError(f"delta must lie in (0, 0.5), got {delta!r}")
    p = class1.frequency
    if abs(p + class2.frequency - 1.0) > 1e-12:
        raise DomainError("class frequencies must sum to one")
    if not 0.0 < p < 1.0:
        raise DomainError("both classes need a positive frequency")
    uf = sigmoid_inverse(1.0 - delta)
    if v0_abs >= uf:
        raise DomainError("class 2 already meets the confidence target")
    t_star = time_to_logit(u0, uf, 1.0)
    t_v = time_to_logit(u0, v0_abs, 1.0)
    t1 = t_star / (class1.norm * p)
    t2 = (t_star - t_v) / (class2.norm * (1.0 - p))
    approx = (class1.norm / class2.norm) * (p / (1.0 - p))
    return t2 / t1, approx


# -- non-degenerate (hyperbolic) flow --------------------------------------


def _initial_angle(state):
    # tanh(theta/2) = |x| z / y above the asymptote and y / (|x| z) below it.
    if state.branch is Branch.ABOVE_ASYMPTOTE:
        return 2.0 * math.atanh(state.norm * state.z / state.y)
    return 2.0 * math.atanh(state.y / (state.norm * state.z))


def _state_from_angle(theta, c, norm, branch):
    r = math.sqrt(c)
    ch, sh = np.cosh(0.5 * theta), np.sinh(0.5 * theta)
    if branch is Branch.ABOVE_ASYMPTOTE:
        return r * ch, r / norm * sh
    return r * sh, r / norm * ch


def _require_solves(y0, z0, norm):
    region = classify(y0, z0, norm)
    if region.kind is not RegionKind.SOLVES:
        raise RegionError(
            f"(y0={y0}, z0={z0}, |x|={norm}) is in region {region.kind.value}, not solves"
        )


def _angle_trajectory(state0, rate_scale, t_end, step):
    c, norm = state0.c, state0.norm
    k = c / (2.0 * norm)

    def rhs(t, th):
        return 2.0 * norm * expit(-k * np.sinh(th))

    system = ode.OdeSystem(1, rhs, "hyperbolic angle", ("theta",))
    traj = ode.integrate(system, [_initial_angle(state0)], rate_scale * t_end, step)
    traj.times = traj.times / rate_scale
    return traj


def solve_hyperbolic(state0, norm, rate_scale, t, step=SOLVER_STEP):
    """State at time ``t`` of the BCE flow started from ``state0``.

    Off the degenerate hyperbola the angle ``theta`` with
    ``yz = c sinh(theta) / (2|x|)`` obeys
    ``theta' = 2|x| / (1 + exp(c sinh(theta) / (2|x|)))`` and is integrated
    with RK4; degenerate starts use the closed form.
    """
    if state0.norm != norm:
        state0 = ScalarState.from_yz(state0.y, state0.z, norm)
    if not 0.0 < rate_scale <= 1.0:
        raise DomainError(f"rate_scale must lie in (0, 1], got {rate_scale!r}")
    if t < 0:
        raise DomainError(f"time must be non-negative, got {t!r}")
    _require_solves(state0.y, state0.z, norm)
    if t == 0:
        return state0
    if state0.branch is Branch.DEGENERATE:
        u = solve_degenerate(state0.logit, norm * rate_scale, t)
        return ScalarState(math.sqrt(u * norm), math.sqrt(u / norm), norm, 0.0, Branch.DEGENERATE)
    theta = _angle_trajectory(state0, rate_scale, t, step).final[0]
    y, z = _state_from_angle(theta, state0.c, norm, state0.branch)
    return ScalarState(float(y), float(z), norm, state0.c, state0.branch)


def hyperbolic_trajectory(state0, norm, rate_scale, t_end, step=SOLVER_STEP):
    """Sampled ``(y, z, u, confidence)`` along the BCE flow from ``state0``."""
    state0 = ScalarState.from_yz(state0.y, state0.z, norm)
    _require_solves(state0.y, state0.z, norm)
    if state0.branch is Branch.DEGENERATE:
        times = ode.time_grid(t_end, step)
        u = np.array([solve_degenerate(state0.logit, norm * rate_scale, t) for t in times])
        y, z = np.sqrt(u * norm), np.sqrt(u / norm)
        meta = {"solver": "closed form", "step": step}
    else:
        angle = _angle_trajectory(state0, rate_scale, t_end, step)
        times = angle.times
        y, z = _state_from_angle(angle.states[:, 0], state0.c, norm, state0.branch)
        u = y * z
        meta = dict(angle.metadata)
    meta["c"] = state0.c
    meta["branch"] = state0.branch.value
    states = np.column_stack([y, z, u, expit(u)])
    return ode.Trajectory(times, states, ("y", "z", "u", "confidence"), meta)


# -- relaxations and extensions --------------------------------------------


def solve_top_left(u0, rate, t, step=SOLVER_STEP):
    """Logit on the top-left asymptote ``y0 = -|x| z0``.

    ``u' = -2 rate u sigma(-u)`` with ``u0 < 0``: the logit increases toward 0
    and never reaches it, with
    ``rate t <= log(-u0) - log(-u(t)) <= 2 rate t``.
    """
    if not u0 < 0:
        raise DomainError(f"top-left initializations have u0 < 0, got {u0!r}")
    _require_positive("rate", rate)
    if t < 0:
        raise DomainError(f"time must be non-negative, got {t!r}")
    if t == 0:
        return float(u0)
    return float(top_left_trajectory(u0, rate, t, step).final[0])


def top_left_trajectory(u0, rate, t_end, step=SOLVER_STEP):
    if not u0 < 0:
        raise DomainError(f"top-left initializations have u0 < 0, got {u0!r}")
    return ode.integrate(logit_system(rate, -1.0), [u0], t_end, step, "top-left logit")


def solve_multi_neuron(u0s, rate, t_end, step=SOLVER_STEP):
    """Coupled per-neuron logits ``(u^i)' = 2 rate u^i sigma(-sum_j u^j)``.

    The returned trajectory has columns ``u1 .. uh`` and their ``sum``; the
    sum follows the single-neuron degenerate dynamics.
    """
    u0s = np.asarray(u0s, dtype=float).reshape(-1)
    if u0s.size == 0 or np.any(u0s <= 0):
        raise DomainError("every per-neuron initial logit must be positive")
    k = 2.0 * rate

    def rhs(t, u):
        return k * u * expit(-u.sum())

    names = tuple(f"u{i + 1}" for i in range(u0s.size))
    system = ode.OdeSystem(u0s.size, rhs, "per-neuron logits", names)
    traj = ode.integrate(system, u0s, t_end, step)
    return traj.with_columns(("sum",), (traj.states.sum(axis=1),))


def orthogonal_class_rate(m, norm):
    """Degenerate logit growth rate ``2 sqrt(m) norm`` for a class of ``m`` orthogonal points.

    Pass ``sqrt(m) * norm`` as ``rate`` to :func:`solve_degenerate` to get the
    logit of any point in the class under full-batch updates.
    """
    if int(m) != m or m < 1:
        raise DomainError(f"m must be a positive integer, got {m!r}")
    return 2.0 * math.sqrt(m) * norm


def orthogonal_batch_system(m, norm):
    """Full-batch flow of ``(y^1 .. y^m, z)`` for ``m`` orthogonal points of equal norm."""
    n2 = float(norm) ** 2

    def rhs(t, s):
        y, z = s[:m], s[m]
        g = expit(-z * y)
        return np.append(n2 * z * g, np.dot(y, g))

    names = tuple(f"y{i + 1}" for i in range(m)) + ("z",)
    return ode.OdeSystem(m + 1, rhs, f"{m} orthogonal points", names)


def relaxed_h2_system():
    """Competition between a class-1 point and an orthogonal class-2 point sharing a neuron.

    ``alpha`` and ``beta`` are the unit-norm components of ``w`` along the two
    points. Once ``beta <= 0`` the class-2 point no longer activates the unit
    and that direction stops learning.
    """

    def rhs(t, s):
        a, b, z = s
        ga = expit(-z * a)
        if b > 0.0:
            gb = expit(z * b)
            return np.array([z * ga, -z * gb, a * ga - b * gb])
        return np.array([z * ga, 0.0, a * ga])

    return ode.OdeSystem(3, rhs, "relaxed H2 competition", ("alpha", "beta", "z"))


def solve_relaxed_h2(alpha0, beta0, z0, t_end, step=SOLVER_STEP):
    """Integrate the relaxed-H2 competition; adds the class-1 logit column ``alpha_z``."""
    for name, value in (("alpha0", alpha0), ("z0", z0)):
        _require_positive(name, value)
    if beta0 < 0:
        raise DomainError(f"beta0 must be non-negative, got {beta0!r}")
    traj = ode.integrate(relaxed_h2_system(), [alpha0, beta0, z0], t_end, step, "relaxed H2")
    return traj.with_columns(("alpha_z",), (traj.column("alpha") * traj.column("z"),))
