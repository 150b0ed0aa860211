"""Hinge-loss dynamics and their comparison with binary cross-entropy.

Before the margin is met the flow is linear, ``y' = |x|^2 z``, ``z' = y``,
so the logit grows exponentially along the same hyperbolas as in the BCE
case. Learning stops exactly when the logit reaches 1.
"""
from dataclasses import dataclass
import csv
import math

import numpy as np

from .bce import Branch, ScalarState, time_to_logit, _initial_angle
from .errors import DomainError, RegionError
from .phase import RegionKind, classify
from .specfn import sigmoid_inverse

MARGIN = 1.0


@dataclass(frozen=True)
class HingeState:
    y: float
    z: float
    c: float
    branch: Branch
    margin_reached: bool

    @property
    def logit(self):
        return self.y * self.z


def _start(y0, z0, norm):
    region = classify(y0, z0, norm)
    if region.kind is not RegionKind.SOLVES:
        raise RegionError(f"hinge dynamics need a solving start, got {region.kind.value}")
    return ScalarState.from_yz(y0, z0, norm)


def _unclipped(state, norm, rate_scale, t):
    """``(y, z)`` of the linear hinge flow at time ``t``, ignoring the margin."""
    if state.branch is Branch.DEGENERATE:
        g = math.exp(rate_scale * norm * t)
        return state.y * g, state.z * g
    theta = _initial_angle(state) + 2.0 * rate_scale * norm * t
    r = math.sqrt(state.c)
    if state.branch is Branch.ABOVE_ASYMPTOTE:
        return r * math.cosh(0.5 * theta), r / norm * math.sinh(0.5 * theta)
    return r * math.sinh(0.5 * theta), r / norm * math.cosh(0.5 * theta)


def time_to_margin(y0, z0, norm, rate_scale=1.0):
    """Time at which the hinge logit reaches the margin 1 (0 if already past it)."""
    state = _start(y0, z0, norm)
    u0 = state.logit
    if u0 >= MARGIN:
        return 0.0
    rate = 2.0 * rate_scale * norm
    if state.branch is Branch.DEGENERATE:
        return math.log(MARGIN / u0) / rate
    return (math.asinh(2.0 * norm * MARGIN / state.c) - _initial_angle(state)) / rate


def hinge_state(y0, z0, norm, rate_scale, t):
    """Full hinge state at time ``t``, frozen at the margin event."""
    if not 0.0 < rate_scale <= 1.0:
        raise DomainError(f"rate_scale must lie in (0, 1], got {rate_scale!r}")
    if t < 0:
        raise DomainError(f"time must be non-negative, got {t!r}")
    state = _start(y0, z0, norm)
    t_m = time_to_margin(y0, z0, norm, rate_scale)
    if t >= t_m:
        if t_m == 0.0:
            return HingeState(state.y, state.z, state.c, state.branch, True)
        y, z = _unclipped(state, norm, rate_scale, t_m)
        return HingeState(y, z, state.c, state.branch, True)
    y, z = _unclipped(state, norm, rate_scale, t)
    return HingeState(y, z, state.c, state.branch, False)


def solve_hinge(y0, z0, norm, rate_scale, t):
    """Hinge-loss logit ``min(1, u(t))`` for a solving initialization.

    ``u(t) = u0 e^{2 p |x| t}`` on the degenerate hyperbola and
    ``(c / 2|x|) sinh(theta0 + 2 p |x| t)`` off it. After the margin time the
    value is exactly 1, including starts that already satisfy the margin.
    """
    state = hinge_state(y0, z0, norm, rate_scale, t)
    if state.margin_reached:
        return MARGIN
    return state.logit


def unclipped_hinge_logit(y0, z0, norm, rate_scale, t):
    y, z = _unclipped(_start(y0, z0, norm), norm, rate_scale, t)
    return y * z


@dataclass(frozen=True)
class LossTiming:
    delta: float
    t_bce: float
    t_hinge: float


def compare_losses(u0, norm, p, delta_grid, clipped=False):
    """Times for BCE and hinge training to reach confidence ``1 - delta``.

    Both losses start from the degenerate logit ``u0``. The hinge time is
    the time its unclipped exponential needs to reach the same logit
    ``sigma^{-1}(1 - delta)``. With ``clipped=True`` targets past the margin
    are unreachable and reported as ``inf``.
    """
    if not u0 > 0:
        raise DomainError(f"u0 must be positive, got {u0!r}")
    rate = norm * p
    rows = []
    for delta in delta_grid:
        if not 0.0 < delta < 0.5:
            raise DomainError(f"delta must lie in (0, 0.5), got {delta!r}")
        target = sigmoid_inverse(1.0 - delta)
        if target < u0:
            raise DomainError(f"target logit {target:.6g} is below u0={u0}")
        t_bce = time_to_logit(u0, target, rate)
        if clipped and target > MARGIN:
            t_hinge = math.inf
        else:
            t_hinge = math.log(target / u0) / (2.0 * rate)
        rows.append(LossTiming(float(delta), t_bce, t_hinge))
    return rows


def write_comparison_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["delta", "t_bce", "t_hinge"])
        for r in rows:
            writer.writerow([repr(r.delta), repr(r.t_bce), repr(r.t_hinge)])
    return len(rows)


@dataclass(frozen=True)
class BatchClassSummary:
    """Sum vector of a class and how each of its points projects onto it."""

    sum_vector: np.ndarray
    sum_vector_norm: float
    projector_coeffs: dict
    residual_inner: dict


def summarize_batch(class_points, w0):
    points = np.atleast_2d(np.asarray(class_points, dtype=float))
    total = points.sum(axis=0)
    norm = float(np.linalg.norm(total))
    if norm == 0.0:
        raise DomainError("the class points sum to zero; the batch flow is degenerate")
    w0 = np.asarray(w0, dtype=float)
    w_perp = w0 - (w0 @ total) / norm**2 * total
    coeffs = {i: float(total @ x) / norm**2 for i, x in enumerate(points)}
    residual = {i: float(w_perp @ x) for i, x in enumerate(points)}
    return BatchClassSummary(total, norm, coeffs, residual)


def hinge_batch_classify(class_points, w0, z0, t, query):
    """Pre-activation output on ``query`` after full-batch hinge training for time ``t``.

    The class behaves like a single point ``X = sum x_i``: ``w`` moves only
    along ``X``, so the output is ``u_t X.q / |X|^2 + z_t w0_perp.q``.
    """
    summary = summarize_batch(class_points, w0)
    big_x, norm = summary.sum_vector, summary.sum_vector_norm
    w0 = np.asarray(w0, dtype=float)
    query = np.asarray(query, dtype=float)
    y0 = float(w0 @ big_x)
    state = hinge_state(y0, z0, norm, 1.0, t)
    w_perp = w0 - y0 / norm**2 * big_x
    return state.logit * float(big_x @ query) / norm**2 + state.z * float(w_perp @ query)
