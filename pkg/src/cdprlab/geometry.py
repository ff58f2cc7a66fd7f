"""Cable geometry of the 4-cable robot: cable vectors, lengths and Jacobian.

Anchors sit at the four top corners of a 2.31 m x 2.81 m frame, 3.22 m high,
numbered counterclockwise from the origin.  The end effector is a point, so
attachment offsets are zero and the orientation is the identity.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConfiguration

FRAME_X = 2.31
FRAME_Y = 2.81
FRAME_HEIGHT = 3.22

# below any positional resolution used in tests
LENGTH_EPSILON = 1e-9


def _default_anchors():
    return np.array([
        [0.0, 0.0, FRAME_HEIGHT],
        [FRAME_X, 0.0, FRAME_HEIGHT],
        [FRAME_X, FRAME_Y, FRAME_HEIGHT],
        [0.0, FRAME_Y, FRAME_HEIGHT],
    ])


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RobotGeometry:
    anchors: np.ndarray = field(default_factory=_default_anchors)
    workspace_min: np.ndarray = field(default_factory=lambda: np.array([0.3, 0.3, 0.3]))
    workspace_max: np.ndarray = field(default_factory=lambda: np.array([2.01, 2.51, 2.5]))
    attachment_offsets: np.ndarray = field(default_factory=lambda: np.zeros((4, 3)))

    def __post_init__(self):
        for name in ("anchors", "workspace_min", "workspace_max", "attachment_offsets"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.anchors.shape != (4, 3):
            raise ValueError(f"expected 4 anchors of shape (4, 3), got {self.anchors.shape}")
        if self.attachment_offsets.shape != (4, 3) or np.any(self.attachment_offsets != 0):
            raise ValueError("attachment offsets must be four zero vectors (point mass)")
        if not np.all(np.isfinite(self.anchors)):
            raise ValueError("anchors must be finite")
        if np.ptp(self.anchors[:, 2]) != 0.0:
            raise ValueError("all anchors must share the same height")
        if not np.all(self.workspace_min < self.workspace_max):
            raise ValueError("workspace_min must be < workspace_max componentwise")
        if self.workspace_max[2] >= self.height:
            raise ValueError("workspace must lie strictly below the anchor height")

    @property
    def height(self):
        return float(self.anchors[0, 2])

    @property
    def workspace_center(self):
        return 0.5 * (self.workspace_min + self.workspace_max)

    @property
    def frame_diagonal(self):
        """Length of the frame's space diagonal (default proximity normaliser)."""
        extent = self.anchors.max(axis=0) - self.anchors.min(axis=0)
        extent[2] = self.height
        return float(np.linalg.norm(extent))

    @property
    def workspace_diagonal(self):
        return float(np.linalg.norm(self.workspace_max - self.workspace_min))


@dataclass(frozen=True, eq=False)
class Pose:
    position: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        object.__setattr__(self, "position", _frozen(self.position))
        object.__setattr__(self, "orientation", _frozen(self.orientation))
        if not np.array_equal(self.orientation, np.eye(3)):
            raise ValueError("only the identity orientation is supported")


def _position(pose):
    if isinstance(pose, Pose):
        return pose.position
    return np.asarray(pose, dtype=float)


def cable_vectors(geom, pose):
    """Return the (4, 3) array of cable vectors ``c - a_i + R b_i``.

    ``pose`` may be a :class:`Pose` or a bare position.  A batch of positions
    of shape (..., 3) gives an array of shape (..., 4, 3).
    """
    c = _position(pose)
    if isinstance(pose, Pose):
        return c - geom.anchors + geom.attachment_offsets @ pose.orientation.T
    # b_i = 0 and R = I, so the rotation term vanishes
    return c[..., None, :] - geom.anchors


def cable_lengths(geom, pose):
    return np.linalg.norm(cable_vectors(geom, pose), axis=-1)


def jacobian(geom, pose):
    """Rows are unit vectors along each cable, pointing anchor -> end effector.

    Row i is also the gradient of cable length i with respect to position.
    """
    vecs = cable_vectors(geom, pose)
    lengths = np.linalg.norm(vecs, axis=-1, keepdims=True)
    if np.any(lengths < LENGTH_EPSILON):
        raise DegenerateConfiguration(
            f"end effector within {LENGTH_EPSILON} m of an anchor")
    return vecs / lengths


def workspace_contains(geom, p):
    p = np.asarray(p, dtype=float)
    return bool(np.all(p >= geom.workspace_min) and np.all(p <= geom.workspace_max))
