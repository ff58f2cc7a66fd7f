"""Reference trajectories, closed-loop tracking and the control-interval sweep."""
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .dynamics import DynamicsParams, distribute_force, integrate
from .env import ActionSpec, action_to_tensions, make_observation
from .errors import AllCandidatesDiverged, EmptySequence, TrajectoryLeavesWorkspace
from .geometry import RobotGeometry, jacobian

CIRCLE = "circle"
SPIRAL_RISING = "spiral_rising"
SPIRAL_SHRINKING = "spiral_shrinking"
KINDS = (CIRCLE, SPIRAL_RISING, SPIRAL_SHRINKING)

DIVERGENCE_ERROR = 10.0


@dataclass(frozen=True, eq=False)
class TrajectorySpec:
    kind: str = CIRCLE
    center: np.ndarray = field(default_factory=lambda: np.array([1.155, 1.405, 1.2]))
    radius: float = 0.5
    period: float = 20.0
    z_rate: float = 0.0
    radius_rate: float = 0.0
    duration: float = 40.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        object.__setattr__(self, "center", np.array(self.center, dtype=float))
        if not (self.radius >= 0 and self.period > 0 and self.duration > 0):
            raise ValueError("radius >= 0, period > 0 and duration > 0 required")


def default_trajectories():
    """The three evaluation paths, keyed by their short names."""
    return {
        "circle": TrajectorySpec(CIRCLE),
        "spiral1": TrajectorySpec(SPIRAL_RISING, z_rate=0.02),
        "spiral2": TrajectorySpec(SPIRAL_SHRINKING, radius_rate=0.01),
    }


def trajectory_by_name(name):
    try:
        return default_trajectories()[name]
    except KeyError:
        raise ValueError(f"unknown trajectory {name!r}; expected one of "
                         f"{sorted(default_trajectories())}") from None


def sample(spec, t):
    """Analytic positions and velocities at times ``t`` (array)."""
    t = np.asarray(t, dtype=float)
    w = 2.0 * np.pi / spec.period
    c, s = np.cos(w * t), np.sin(w * t)
    r = np.full_like(t, spec.radius)
    dr = np.zeros_like(t)
    z = np.zeros_like(t)
    dz = np.zeros_like(t)
    if spec.kind == SPIRAL_RISING:
        z = spec.z_rate * t
        dz = np.full_like(t, spec.z_rate)
    elif spec.kind == SPIRAL_SHRINKING:
        r = spec.radius - spec.radius_rate * t
        dr = np.where(r > 0, -spec.radius_rate, 0.0)
        r = np.maximum(r, 0.0)
    pos = spec.center + np.stack([r * c, r * s, z], axis=-1)
    vel = np.stack([dr * c - r * w * s, dr * s + r * w * c, dz], axis=-1)
    return pos, vel


def generate(spec, dt, geom=None):
    """Reference samples at ``t = 0, dt, ..., N dt`` with ``N = round(duration/dt)``.

    Returns ``(times, positions, velocities)``; N + 1 rows each.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if spec.duration < dt:
        raise ValueError("duration must be >= dt")
    geom = geom or RobotGeometry()
    n = int(round(spec.duration / dt))
    times = np.arange(n + 1) * dt
    pos, vel = sample(spec, times)
    outside = np.any((pos < geom.workspace_min) | (pos > geom.workspace_max), axis=1)
    if outside.any():
        k = int(np.argmax(outside))
        raise TrajectoryLeavesWorkspace(
            f"{spec.kind} leaves the workspace at t={times[k]:.3f} s: {pos[k]}")
    return times, pos, vel


def rms_error(errors):
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise EmptySequence("rms of an empty error sequence")
    scale = float(np.max(np.abs(e)))
    if scale == 0.0 or not np.isfinite(scale):
        return scale
    # scaled so tiny errors do not underflow when squared
    return scale * float(np.sqrt(np.mean((e / scale) ** 2)))


class TrackingResult(NamedTuple):
    times: np.ndarray
    reference: np.ndarray
    actual: np.ndarray
    errors: np.ndarray
    rms: float
    diverged: bool


class ZeroController:
    """Applies no tension at all."""

    name = "zero"

    def reset(self, geom, params):
        pass

    def tensions(self, position, velocity, ref_now, ref_next):
        return np.zeros(4)


class InverseDynamicsController:
    """Deadbeat controller landing exactly on the next reference point.

    Solves the semi-implicit Euler update for the acceleration that carries
    the mass to the next waypoint in one step.  Used to validate the harness.
    """

    name = "oracle"

    def reset(self, geom, params):
        self._geom, self._params = geom, params

    def tensions(self, position, velocity, ref_now, ref_next):
        dt = self._params.dt
        a = (ref_next[0] - position - velocity * dt) / dt ** 2
        force = self._params.mass * (a + np.array([0.0, 0.0, self._params.gravity]))
        J = jacobian(self._geom, position)
        return distribute_force(J, force, self._params.max_tension).tensions


class PolicyController:
    """Drives a trained policy along a path as a moving reach target.

    The next reference point fills the target slots of the observation and,
    for 12-input policies, the reference velocity fills the target-velocity
    slots.
    """

    def __init__(self, policy, name="policy"):
        self.policy = policy
        self.name = name
        head = getattr(policy, "head", None)
        if head is not None and head.kind == "categorical":
            self.action_spec = ActionSpec("discrete", head.levels)
        else:
            self.action_spec = ActionSpec("continuous")
        if policy.obs_dim not in (9, 12):
            raise ValueError(f"policy observes {policy.obs_dim} inputs; expected 9 or 12")

    def reset(self, geom, params):
        self._max_tension = params.max_tension

    def tensions(self, position, velocity, ref_now, ref_next):
        target_velocity = ref_next[1] if self.policy.obs_dim == 12 else None
        obs = make_observation(position, velocity, ref_next[0], target_velocity)
        action = self.policy.deterministic_action(obs)
        return action_to_tensions(self.action_spec, action, self._max_tension)


def track(controller, geom, params, spec, dt):
    """Simulate ``controller`` following ``spec`` for the whole duration.

    The mass starts on the path with the reference velocity.  Each step the
    controller sees the current and next reference samples; the error is
    measured after the step against the next sample.  The run is flagged
    diverged, and stopped, when the error exceeds 10 m or the mass hits the
    workspace boundary; RMS then covers only the steps before that.
    """
    geom = geom or RobotGeometry()
    params = (params or DynamicsParams()).with_dt(dt)
    times, ref_pos, ref_vel = generate(spec, dt, geom)
    controller.reset(geom, params)
    p, v = ref_pos[0].copy(), ref_vel[0].copy()
    n = len(times) - 1
    actual = np.empty((n, 3))
    errors = np.empty(n)
    diverged = False
    k_end = n
    for k in range(n):
        t = controller.tensions(p, v, (ref_pos[k], ref_vel[k]), (ref_pos[k + 1], ref_vel[k + 1]))
        p, v, clamped = integrate(geom, params, p, v, t)
        err = float(np.linalg.norm(p - ref_pos[k + 1]))
        actual[k] = p
        errors[k] = err
        if clamped or not np.isfinite(err) or err > DIVERGENCE_ERROR:
            diverged = True
            k_end = k
            break
    if diverged:
        rms = rms_error(errors[:k_end]) if k_end > 0 else float("inf")
        return TrackingResult(times[1:k_end + 2], ref_pos[1:k_end + 2], actual[:k_end + 1],
                              errors[:k_end + 1], rms, True)
    return TrackingResult(times[1:], ref_pos[1:], actual, errors, rms_error(errors), False)


class SweepRow(NamedTuple):
    controller: str
    dt: float
    rms: float
    diverged: bool
    gains: str = ""


def dt_sweep(controllers, spec, dt_list, geom=None, params=None, pid_grid=None):
    """Track ``spec`` with every controller at every control interval.

    PID controllers built without gains are re-tuned at each ``dt``.  Rows are
    sorted by (controller name, dt).
    """
    from .pid import PidController, search_gains  # pid builds on track()

    if not dt_list:
        raise ValueError("empty dt list")
    geom = geom or RobotGeometry()
    params = params or DynamicsParams()
    rows = []
    for ctrl in controllers:
        for dt in dt_list:
            p = params.with_dt(dt)
            gains_text = ""
            if isinstance(ctrl, PidController) and ctrl.auto:
                try:
                    gains, _, _ = search_gains(geom, p, spec, pid_grid)
                except AllCandidatesDiverged:
                    rows.append(SweepRow(ctrl.name, float(dt), float("inf"), True))
                    continue
                runner = PidController(gains, ctrl.name, ctrl.integral_limit)
                gains_text = gains.as_text()
            else:
                runner = ctrl
                if isinstance(ctrl, PidController):
                    gains_text = ctrl.gains.as_text()
            result = track(runner, geom, p, spec, dt)
            rows.append(SweepRow(runner.name, float(dt), result.rms, result.diverged, gains_text))
    rows.sort(key=lambda r: (r.controller, r.dt))
    return rows
