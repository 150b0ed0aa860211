"""Fixed-step classical Runge-Kutta integration.

This is the numerical oracle every closed form in the package is checked
against, and the only solver for systems that have no closed form.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainError, NonFiniteStateError

DEFAULT_STEP = 1e-4


@dataclass(frozen=True)
class OdeSystem:
    """Autonomous or time-dependent system ``x' = rhs(t, x)``.

    ``rhs`` must accept and return 1-d float arrays of length ``dimension``.
    ``columns`` names the state components for output tables.
    """

    dimension: int
    rhs: object
    description: str = ""
    columns: tuple = ()

    def __post_init__(self):
        if self.dimension < 1:
            raise DomainError("an ODE system needs at least one component")
        if self.columns and len(self.columns) != self.dimension:
            raise DomainError("columns must name every state component")

    def names(self):
        return self.columns or tuple(f"x{i}" for i in range(self.dimension))


@dataclass
class Trajectory:
    """Sampled solution: ``states[i]`` is the state at ``times[i]``."""

    times: np.ndarray
    states: np.ndarray
    columns: tuple
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def column(self, name):
        return self.states[:, self.columns.index(name)]

    @property
    def final(self):
        return self.states[-1]

    def with_columns(self, names, values):
        """Return a copy with extra derived columns appended."""
        extra = np.column_stack([np.asarray(v, dtype=float) for v in values])
        return Trajectory(
            self.times,
            np.hstack([self.states, extra]),
            tuple(self.columns) + tuple(names),
            dict(self.metadata),
        )


def rk4_step(rhs, t, x, h):
    """One classical fourth-order Runge-Kutta step of size ``h``."""
    k1 = rhs(t, x)
    k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = rhs(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def time_grid(t_end, step):
    """Times ``0, step, 2 step, ..., t_end`` with the last interval shortened."""
    n = math.ceil(t_end / step - 1e-9)
    times = np.arange(n + 1, dtype=float) * step
    times[-1] = t_end
    return times


def _check_positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")


def integrate(system, initial, t_end, step=DEFAULT_STEP, label=""):
    """Integrate ``system`` from ``t = 0`` to ``t_end`` with fixed-step RK4.

    Every step is recorded and the final sample sits exactly at ``t_end``.

    Raises
    ------
    NonFiniteStateError
        If any component becomes NaN or infinite.
    """
    _check_positive("step", step)
    _check_positive("t_end", t_end)
    x = np.array(initial, dtype=float).reshape(-1)
    if x.size != system.dimension:
        raise DomainError(
            f"initial state has {x.size} components, system expects {system.dimension}"
        )
    rhs = system.rhs
    if not np.all(np.isfinite(rhs(0.0, x))):
        raise NonFiniteStateError("right-hand side is not finite at the initial state")

    times = time_grid(t_end, step)
    states = np.empty((len(times), x.size))
    states[0] = x
    for i in range(1, len(times)):
        x = rk4_step(rhs, times[i - 1], x, times[i] - times[i - 1])
        if not np.all(np.isfinite(x)):
            raise NonFiniteStateError(
                f"state became non-finite at t={times[i]:.6g} in {system.description or 'system'}"
            )
        states[i] = x
    return Trajectory(
        times,
        states,
        system.names(),
        {"solver": "rk4", "step": step, "scenario": label or system.description},
    )


def richardson_refine(system, initial, t_end, step=DEFAULT_STEP, label=""):
    """Integrate at ``step`` and ``step / 2``; return the fine run.

    The maximum discrepancy between the two runs on their shared sample
    times is stored as ``metadata["discrepancy"]``. For RK4 the true error
    of the fine run is roughly that value divided by 15.
    """
    coarse = integrate(system, initial, t_end, step, label)
    fine = integrate(system, initial, t_end, 0.5 * step, label)
    shared = np.isin(fine.times, coarse.times)
    fine_shared = fine.states[shared]
    if len(fine_shared) != len(coarse.states):
        raise AssertionError("coarse and fine time grids are not nested")
    fine.metadata["discrepancy"] = float(np.max(np.abs(fine_shared - coarse.states)))
    fine.metadata["coarse_step"] = step
    return fine
