"""Point-mass dynamics of the end effector under cable tensions and gravity.

Cable i pulls the mass toward its anchor with force ``-t_i * S_i`` where
``S_i`` is row i of :func:`cdprlab.geometry.jacobian`, so the net cable force
is ``-J.T @ t``.  Integration is semi-implicit Euler with the position clamped
to the workspace box.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import lsq_linear

from .errors import InfeasibleEquilibrium
from .geometry import jacobian

# tiny Tikhonov weight: picks the minimum-norm tension set when the bounded
# least-squares optimum is not unique
_RIDGE = 1e-6


@dataclass(frozen=True)
class DynamicsParams:
    mass: float = 1.0
    gravity: float = 9.81
    dt: float = 0.1
    max_tension: float = 20.0

    def __post_init__(self):
        for name in ("mass", "gravity", "dt", "max_tension"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")

    def with_dt(self, dt):
        return DynamicsParams(self.mass, self.gravity, dt, self.max_tension)


@dataclass(frozen=True, eq=False)
class EndEffectorState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.array(self.position, dtype=float))
        object.__setattr__(self, "velocity", np.array(self.velocity, dtype=float))
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))):
            raise ValueError("state must be finite")

    @classmethod
    def at_rest(cls, position):
        return cls(position, np.zeros(3))


class TensionSolution(NamedTuple):
    tensions: np.ndarray
    residual: float


def _check_tensions(tensions, max_tension):
    t = np.asarray(tensions, dtype=float)
    if t.shape != (4,):
        raise ValueError(f"expected 4 tensions, got shape {t.shape}")
    # allow round-off from the tension solver
    slack = 1e-9 * max_tension
    if np.any(t < -slack) or np.any(t > max_tension + slack) or not np.all(np.isfinite(t)):
        raise ValueError(f"tensions {t} outside [0, {max_tension}]")
    return t


def gravity_vector(params):
    return np.array([0.0, 0.0, -params.gravity])


def acceleration(geom, params, state, tensions):
    position = state.position if isinstance(state, EndEffectorState) else state
    t = _check_tensions(tensions, params.max_tension)
    J = jacobian(geom, position)
    return -(J.T @ t) / params.mass + gravity_vector(params)


def integrate(geom, params, position, velocity, tensions):
    """One semi-implicit Euler step on raw arrays.

    Returns ``(position, velocity, clamped)`` where ``clamped`` tells whether
    the workspace box stopped the mass on this step.
    """
    a = acceleration(geom, params, position, tensions)
    v = velocity + a * params.dt
    p = position + v * params.dt
    lo, hi = geom.workspace_min, geom.workspace_max
    hit = (p < lo) | (p > hi)
    if hit.any():
        p = np.clip(p, lo, hi)
        v = np.where(hit, 0.0, v)
    return p, v, bool(hit.any())


def step(geom, params, state, tensions):
    p, v, _ = integrate(geom, params, state.position, state.velocity, tensions)
    return EndEffectorState(p, v)


def distribute_force(J, force, max_tension):
    """Bounded tensions whose cable force ``-J.T @ t`` best matches ``force``.

    Among all minimisers the smallest-norm tension set is returned.  When the
    exact solution is reachable this is solved in closed form along the
    one-dimensional null space of ``J.T``; otherwise a bounded least-squares
    problem is solved.
    """
    A = -J.T
    force = np.asarray(force, dtype=float)
    u, s, vt = np.linalg.svd(A)
    if s[-1] > 1e-12 * s[0]:
        t_min = vt[:3].T @ ((u.T @ force) / s)
        null = vt[3]
        lo, hi = -np.inf, np.inf
        feasible = True
        for ti, ni in zip(t_min, null):
            if abs(ni) < 1e-14:
                if ti < 0.0 or ti > max_tension:
                    feasible = False
                continue
            a, b = -ti / ni, (max_tension - ti) / ni
            if a > b:
                a, b = b, a
            lo, hi = max(lo, a), min(hi, b)
        if feasible and lo <= hi:
            t = np.clip(t_min + min(max(0.0, lo), hi) * null, 0.0, max_tension)
            return TensionSolution(t, float(np.linalg.norm(A @ t - force)))
    A_aug = np.vstack([A, _RIDGE * np.eye(4)])
    b_aug = np.concatenate([force, np.zeros(4)])
    sol = lsq_linear(A_aug, b_aug, bounds=(0.0, max_tension), method="bvls", tol=1e-12)
    t = np.clip(sol.x, 0.0, max_tension)
    return TensionSolution(t, float(np.linalg.norm(A @ t - force)))


def static_equilibrium_tensions(geom, params, position):
    """Tensions holding the mass at rest at ``position``.

    Raises :class:`InfeasibleEquilibrium` when the residual force exceeds
    ``1e-6 * m * g``.
    """
    J = jacobian(geom, position)
    weight = params.mass * params.gravity
    sol = distribute_force(J, np.array([0.0, 0.0, weight]), params.max_tension)
    if sol.residual > 1e-6 * weight:
        raise InfeasibleEquilibrium(
            f"no bounded pull-only tensions hold {np.asarray(position)}: "
            f"residual {sol.residual:.3g} N")
    return sol
