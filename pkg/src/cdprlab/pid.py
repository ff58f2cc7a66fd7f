"""Task-space PID with gravity feedforward, distributed to cable tensions."""
from dataclasses import dataclass, field
from itertools import product
from typing import Optional

import numpy as np

from .dynamics import distribute_force
from .errors import AllCandidatesDiverged
from .geometry import jacobian
from .trajectories import track

INTEGRAL_LIMIT = 1.0

DEFAULT_GRID = {
    "kp": (5.0, 15.0, 40.0),
    "kd": (1.0, 5.0, 15.0),
    "ki": (0.0, 0.5, 2.0),
}


def _vec3(x):
    v = np.broadcast_to(np.asarray(x, dtype=float), (3,)).copy()
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class PidGains:
    kp: np.ndarray
    ki: np.ndarray
    kd: np.ndarray

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            v = _vec3(getattr(self, name))
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} gains must be finite and >= 0")
            object.__setattr__(self, name, v)

    @classmethod
    def uniform(cls, kp, ki, kd):
        return cls(kp, ki, kd)

    def __eq__(self, other):
        return (isinstance(other, PidGains) and np.array_equal(self.kp, other.kp)
                and np.array_equal(self.ki, other.ki) and np.array_equal(self.kd, other.kd))

    def __repr__(self):
        def fmt(v):
            return repr(float(v[0])) if np.all(v == v[0]) else repr(v.tolist())
        return f"PidGains(kp={fmt(self.kp)}, ki={fmt(self.ki)}, kd={fmt(self.kd)})"

    def as_text(self):
        """``kp=15 ki=0.5 kd=5``; per-axis values are joined with '/'."""
        def fmt(v):
            return f"{v[0]:g}" if np.all(v == v[0]) else "/".join(f"{x:g}" for x in v)
        return " ".join(f"{n}={fmt(getattr(self, n))}" for n in ("kp", "ki", "kd"))


@dataclass(frozen=True, eq=False)
class PidState:
    integral: np.ndarray = field(default_factory=lambda: np.zeros(3))
    prev_error: Optional[np.ndarray] = None
    integral_limit: float = INTEGRAL_LIMIT


def pid_force(gains, state, error, dt, mass=1.0, gravity=9.81):
    """Return ``(force, new_state)``.

    The integral is advanced by ``error * dt`` and clamped before use.  On the
    first call (no previous error) the derivative term is zero.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    e = np.asarray(error, dtype=float)
    integral = np.clip(state.integral + e * dt, -state.integral_limit, state.integral_limit)
    if state.prev_error is None:
        de = np.zeros(3)
    else:
        de = (e - state.prev_error) / dt
    force = gains.kp * e + gains.ki * integral + gains.kd * de
    force = force + np.array([0.0, 0.0, mass * gravity])
    return force, PidState(integral, e, state.integral_limit)


def force_to_tensions(geom, pose, desired_force, max_tension):
    """Bounded pull-only tensions realising ``desired_force`` as well as possible.

    Returns a ``TensionSolution``; its ``residual`` is the force error in N.
    """
    return distribute_force(jacobian(geom, pose), desired_force, max_tension)


class PidController:
    """Closed-loop PID for the tracking harness.

    ``gains=None`` means the gains are tuned for each (trajectory, dt) pair
    before tracking; see :func:`cdprlab.trajectories.track`.
    """

    def __init__(self, gains=None, name="pid", integral_limit=INTEGRAL_LIMIT):
        self.gains = gains
        self.name = name
        self.integral_limit = integral_limit
        self._state = None

    @property
    def auto(self):
        return self.gains is None

    def reset(self, geom, params):
        if self.gains is None:
            raise ValueError("PID gains not set; tune them first")
        self._geom, self._params = geom, params
        self._state = PidState(integral_limit=self.integral_limit)

    def tensions(self, position, velocity, ref_now, ref_next):
        error = ref_now[0] - position
        force, self._state = pid_force(self.gains, self._state, error, self._params.dt,
                                       self._params.mass, self._params.gravity)
        return force_to_tensions(self._geom, position, force, self._params.max_tension).tensions


def gain_grid(kp=DEFAULT_GRID["kp"], kd=DEFAULT_GRID["kd"], ki=DEFAULT_GRID["ki"]):
    """Cartesian grid of axis-uniform gains."""
    return [PidGains(p, i, d) for p, d, i in product(kp, kd, ki)]


def tune_gains(geom, params, trajectory, search_grid=None):
    """Grid search for the gains with the lowest RMS tracking error.

    Each candidate tracks ``trajectory`` at ``params.dt``.  Ties go to the
    smaller gains, compared by Kp, then Kd, then Ki.
    """
    return search_gains(geom, params, trajectory, search_grid)[0]


def search_gains(geom, params, trajectory, search_grid=None):
    """Like :func:`tune_gains` but returns ``(gains, rms, table)``.

    ``table`` lists ``(gains, rms, diverged)`` for every candidate in grid order.
    """
    grid = list(search_grid) if search_grid is not None else gain_grid()
    if not grid:
        raise ValueError("empty gain grid")
    best = None
    table = []
    for gains in grid:
        result = track(PidController(gains), geom, params, trajectory, params.dt)
        table.append((gains, result.rms, result.diverged))
        if result.diverged or not np.isfinite(result.rms):
            continue
        # sub-picometre differences are round-off, count them as ties
        key = (round(result.rms, 12), np.linalg.norm(gains.kp), np.linalg.norm(gains.kd),
               np.linalg.norm(gains.ki))
        if best is None or key < best[0]:
            best = (key, gains, result.rms)
    if best is None:
        err = AllCandidatesDiverged(f"all {len(grid)} gain candidates diverged at dt={params.dt}")
        err.table = table
        raise err
    return best[1], best[2], table
