import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdprlab.errors import DegenerateConfiguration
from cdprlab.geometry import (Pose, RobotGeometry, cable_lengths, cable_vectors, jacobian,
                              workspace_contains)

from .conftest import random_workspace_points

CENTER_Z1 = np.array([1.155, 1.405, 1.0])


def brute_lengths(anchors, c):
    # plain loops, no vectorisation
    out = []
    for a in anchors:
        out.append(math.sqrt(sum((c[k] - a[k]) ** 2 for k in range(3))))
    return np.array(out)


def test_cable_vector_below_anchor(geom):
    l = cable_vectors(geom, Pose([0.0, 0.0, 1.0]))
    np.testing.assert_allclose(l[0], [0.0, 0.0, -2.22], atol=1e-15)


def test_cable_vector_at_anchor_is_zero(geom):
    l = cable_vectors(geom, geom.anchors[0])
    np.testing.assert_array_equal(l[0], np.zeros(3))


def test_center_lengths_equal_and_match_hand_value(geom):
    lengths = cable_lengths(geom, CENTER_Z1)
    expected = math.sqrt(1.155 ** 2 + 1.405 ** 2 + 2.22 ** 2)
    assert expected == pytest.approx(2.8699, abs=1e-4)
    np.testing.assert_allclose(lengths, expected, rtol=0, atol=1e-12)


def test_length_below_anchor(geom):
    assert cable_lengths(geom, [0.0, 0.0, 1.0])[0] == pytest.approx(2.22, abs=1e-15)


def test_jacobian_below_anchor(geom):
    np.testing.assert_allclose(jacobian(geom, [0.0, 0.0, 1.0])[0], [0, 0, -1], atol=1e-15)


def test_jacobian_center_symmetry(geom):
    J = jacobian(geom, CENTER_Z1)
    assert abs(J[:, 0].sum()) < 1e-12
    assert abs(J[:, 1].sum()) < 1e-12


def test_jacobian_degenerate_at_anchor(geom):
    with pytest.raises(DegenerateConfiguration):
        jacobian(geom, geom.anchors[2])


def test_jacobian_rows_unit_and_match_finite_differences(geom):
    h = 1e-6
    for c in random_workspace_points(geom, 120, seed=3):
        J = jacobian(geom, c)
        np.testing.assert_allclose(np.linalg.norm(J, axis=1), 1.0, atol=1e-12)
        fd = np.empty((4, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            fd[:, k] = (brute_lengths(geom.anchors, c + e)
                        - brute_lengths(geom.anchors, c - e)) / (2 * h)
        np.testing.assert_allclose(J, fd, atol=1e-6)


def test_batched_vectors_match_single(geom):
    pts = random_workspace_points(geom, 5)
    batch = cable_vectors(geom, pts)
    assert batch.shape == (5, 4, 3)
    for p, v in zip(pts, batch):
        np.testing.assert_array_equal(v, cable_vectors(geom, p))


def test_workspace_contains(geom):
    assert workspace_contains(geom, geom.workspace_center)
    assert not workspace_contains(geom, geom.workspace_max + [0.01, 0, 0])
    assert workspace_contains(geom, geom.workspace_min)
    assert workspace_contains(geom, geom.workspace_max)


def test_geometry_invariants_enforced():
    with pytest.raises(ValueError):
        RobotGeometry(anchors=np.zeros((3, 3)))
    bad = RobotGeometry().anchors.copy()
    bad[0, 2] = 3.0
    with pytest.raises(ValueError):
        RobotGeometry(anchors=bad)
    with pytest.raises(ValueError):
        RobotGeometry(workspace_max=np.array([2.0, 2.0, 3.5]))
    with pytest.raises(ValueError):
        RobotGeometry(attachment_offsets=np.ones((4, 3)))
    with pytest.raises(ValueError):
        Pose([1, 1, 1], orientation=np.diag([1.0, -1.0, -1.0]))


def test_frame_diagonal(geom):
    assert geom.frame_diagonal == pytest.approx(math.sqrt(2.31 ** 2 + 2.81 ** 2 + 3.22 ** 2))
    assert geom.frame_diagonal == pytest.approx(4.858, abs=1e-3)


coord = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.tuples(coord, coord, coord), st.tuples(coord, coord, coord))
def test_translation_equivariance(c, shift):
    geom = RobotGeometry()
    c, shift = np.array(c), np.array(shift)
    moved = RobotGeometry(anchors=geom.anchors + shift,
                          workspace_min=geom.workspace_min + shift,
                          workspace_max=geom.workspace_max + shift)
    np.testing.assert_allclose(cable_vectors(moved, c + shift), cable_vectors(geom, c),
                               atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.tuples(coord, coord, coord))
def test_vectors_plus_anchor_give_position(c):
    geom = RobotGeometry()
    c = np.array(c)
    np.testing.assert_allclose(cable_vectors(geom, c) + geom.anchors, np.tile(c, (4, 1)),
                               rtol=0, atol=1e-14)  # one rounding of (c - a) + a
