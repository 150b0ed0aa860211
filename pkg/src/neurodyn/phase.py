"""Phase diagram of initializations ``(y0, z0)`` for a single class-1 point.

Boundaries are the line ``y = 0`` (ReLU inactive below it) and the
asymptote ``y = -|x| z`` in the top-left quadrant. Every boundary is a ray
through the origin, so the diagram is invariant under positive rescaling.
"""
import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit

from .errors import DomainError
from .ode import time_grid

#: Points within this relative distance of an asymptote are flagged as on it.
BOUNDARY_RTOL = 1e-12

SOLVED_LOGIT = 10.0
ZERO_LOGIT = 1e-3

DEFAULT_FATE_HORIZON = 2000.0
DEFAULT_FATE_STEP = 0.05


class RegionKind(Enum):
    FROZEN = "frozen"
    DIES = "dies"
    CONVERGES_TO_ZERO = "converges_to_zero"
    SOLVES = "solves"


class Boundary(Enum):
    ON_ASYMPTOTE_POSITIVE = "on_asymptote_positive"
    ON_ASYMPTOTE_NEGATIVE = "on_asymptote_negative"


class Observed(Enum):
    FROZEN = "frozen"
    DIES = "dies"
    CONVERGES_TO_ZERO = "converges_to_zero"
    SOLVES = "solves"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class PhaseRegion:
    kind: RegionKind
    boundary: Boundary = None


@dataclass(frozen=True)
class FateCheck:
    region: PhaseRegion
    observed: Observed
    agree: bool


def classify(y0, z0, norm):
    """Predicted fate of the initialization ``(y0, z0)`` for inputs of norm ``norm``.

    ``y0 <= 0`` is frozen (the unit starts inactive). For ``z0 < 0`` the
    point solves above the asymptote ``y0 = -norm z0``, dies below it and
    converges to a zero logit on it.
    """
    if not norm > 0:
        raise DomainError(f"input norm must be positive, got {norm!r}")
    tol = BOUNDARY_RTOL * (abs(y0) + norm * abs(z0))
    boundary = None
    on_negative = abs(y0 + norm * z0) <= tol
    if on_negative:
        boundary = Boundary.ON_ASYMPTOTE_NEGATIVE
    elif abs(y0 - norm * z0) <= tol:
        boundary = Boundary.ON_ASYMPTOTE_POSITIVE

    if y0 <= 0:
        kind = RegionKind.FROZEN
    elif z0 >= 0:
        kind = RegionKind.SOLVES
    elif on_negative:
        kind = RegionKind.CONVERGES_TO_ZERO
    elif y0 > -norm * z0:
        kind = RegionKind.SOLVES
    else:
        kind = RegionKind.DIES
    return PhaseRegion(kind, boundary)


def mirror_for_class2(y0, z0):
    """Class-2 diagrams are the class-1 diagram with the z axis mirrored."""
    return y0, -z0


def _gated_rhs(norm):
    n2 = norm * norm

    def rhs(y, z, active):
        g = expit(-y * z) * active
        return n2 * z * g, y * g

    return rhs


def observe_fates(y0, z0, norm, t_end=DEFAULT_FATE_HORIZON, step=DEFAULT_FATE_STEP):
    """Integrate the ReLU-gated BCE flow for a batch of initializations.

    Once ``y <= 0`` the unit is dead and both weights freeze. Fates are read
    off with fixed thresholds: logit above ``SOLVED_LOGIT`` solves, a dead
    unit from a positive start dies, an untouched start is frozen and a
    negative logit still shrinking below ``ZERO_LOGIT`` in magnitude at the
    horizon converges to zero. Integration stops early once every point is
    decided.

    The line ``y = -norm z`` is invariant but unstable, so rounding alone
    would push a start placed on it to one side. Starts flagged as lying on
    it are projected back onto the line after every step.

    Returns an array of :class:`Observed` values and the final ``(y, z)``.
    """
    y = np.array(y0, dtype=float).reshape(-1)
    z = np.array(z0, dtype=float).reshape(-1)
    if y.shape != z.shape:
        raise DomainError("y0 and z0 must have the same length")
    start_y, start_z = y.copy(), z.copy()
    rhs = _gated_rhs(float(norm))
    active = (y > 0).astype(float)
    decided = np.zeros(y.size, dtype=object)
    decided[:] = None
    decided[y <= 0] = Observed.FROZEN
    pending = y > 0
    on_line = pending & (z < 0) & (np.abs(y + norm * z) <= BOUNDARY_RTOL * (np.abs(y) + norm * np.abs(z)))
    prev_abs_u = np.abs(y * z)

    times = time_grid(t_end, step)
    for i in range(1, len(times)):
        if not pending.any():
            break
        h = times[i] - times[i - 1]
        idx = np.flatnonzero(pending)
        ys, zs, act = y[idx], z[idx], active[idx]
        k1y, k1z = rhs(ys, zs, act)
        k2y, k2z = rhs(ys + 0.5 * h * k1y, zs + 0.5 * h * k1z, act)
        k3y, k3z = rhs(ys + 0.5 * h * k2y, zs + 0.5 * h * k2z, act)
        k4y, k4z = rhs(ys + h * k3y, zs + h * k3z, act)
        ys = ys + (h / 6.0) * (k1y + 2 * k2y + 2 * k3y + k4y)
        zs = zs + (h / 6.0) * (k1z + 2 * k2z + 2 * k3z + k4z)
        line = on_line[idx]
        if line.any():
            mid = 0.5 * (ys[line] - norm * zs[line])
            ys[line], zs[line] = mid, -mid / norm
        prev_abs_u[idx] = np.abs(y[idx] * z[idx])

        died = ys <= 0
        ys = np.where(died, 0.0, ys)
        y[idx], z[idx] = ys, zs
        active[idx[died]] = 0.0
        decided[idx[died]] = Observed.DIES
        solved = (ys * zs > SOLVED_LOGIT) & ~died
        decided[idx[solved]] = Observed.SOLVES
        # projected starts cannot leave the line, so their fate is settled
        # as soon as the logit is small and still shrinking
        u_now = ys * zs
        settled = line & (u_now < 0) & (np.abs(u_now) < ZERO_LOGIT) & (np.abs(u_now) < prev_abs_u[idx])
        decided[idx[settled]] = Observed.CONVERGES_TO_ZERO
        pending[idx[died | solved | settled]] = False

    u = y * z
    for j in np.flatnonzero(pending):
        if u[j] < 0 and abs(u[j]) < ZERO_LOGIT and abs(u[j]) < prev_abs_u[j]:
            decided[j] = Observed.CONVERGES_TO_ZERO
        else:
            decided[j] = Observed.UNDECIDED
    frozen_moved = (decided == Observed.FROZEN) & ((y != start_y) | (z != start_z))
    decided[frozen_moved] = Observed.UNDECIDED
    return decided, y, z


_AGREEING = {
    RegionKind.FROZEN: Observed.FROZEN,
    RegionKind.DIES: Observed.DIES,
    RegionKind.CONVERGES_TO_ZERO: Observed.CONVERGES_TO_ZERO,
    RegionKind.SOLVES: Observed.SOLVES,
}


def verify_fate(y0, z0, norm, t_end=DEFAULT_FATE_HORIZON, step=DEFAULT_FATE_STEP):
    """Compare :func:`classify` with the fate observed by integration."""
    region = classify(y0, z0, norm)
    observed = observe_fates([y0], [z0], norm, t_end, step)[0][0]
    return FateCheck(region, observed, _AGREEING[region.kind] is observed)


@dataclass(frozen=True)
class ScanRow:
    y0: float
    z0: float
    norm: float
    region: PhaseRegion
    observed: Observed
    agree: bool


def in_asymptote_band(y0, z0, norm, width=1e-9):
    """True for top-left points within ``width`` of the line ``y = -norm z``."""
    return y0 > 0 and z0 < 0 and abs(y0 + norm * z0) <= width


def scan_grid(norm, grid=41, extent=2.0, t_end=DEFAULT_FATE_HORIZON,
              step=DEFAULT_FATE_STEP, class2=False):
    """Classify and verify a ``grid x grid`` lattice over ``[-extent, extent]^2``.

    Rows are ordered with ``z0`` varying slowest. With ``class2`` the z axis
    is mirrored before classification so the rows describe a class-2 point.
    """
    axis = np.linspace(-extent, extent, grid)
    zz, yy = np.meshgrid(axis, axis, indexing="ij")
    ys, zs = yy.ravel(), zz.ravel()
    cz = -zs if class2 else zs
    observed, _, _ = observe_fates(ys, cz, norm, t_end, step)
    rows = []
    for yv, zv, czv, obs in zip(ys, zs, cz, observed):
        region = classify(yv, czv, norm)
        rows.append(ScanRow(float(yv), float(zv), float(norm), region, obs,
                            _AGREEING[region.kind] is obs))
    return rows


def write_scan_csv(rows, path):
    """Write scan rows with columns ``y0, z0, norm, region, observed, agree``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y0", "z0", "norm", "region", "observed", "agree"])
        for r in rows:
            writer.writerow([repr(r.y0), repr(r.z0), repr(r.norm), r.region.kind.value,
                             r.observed.value, str(r.agree).lower()])
    return len(rows)
