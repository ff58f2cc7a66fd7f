"""
Cable geometry and static equilibrium
=====================================

Four cables hang from the top corners of a 2.31 m x 2.81 m frame, 3.22 m up.
The end effector is a 1 kg point mass.  This walk-through computes cable
vectors and the Jacobian, then the tensions that hold the mass still.
"""

# %%
import numpy as np

from cdprlab import DynamicsParams, RobotGeometry
from cdprlab.dynamics import acceleration, static_equilibrium_tensions
from cdprlab.geometry import cable_lengths, cable_vectors, jacobian

geom = RobotGeometry()
params = DynamicsParams()
print("anchors\n", geom.anchors)
print("workspace", geom.workspace_min, "to", geom.workspace_max)

# %%
# Below the middle of the frame every cable has the same length.
c = np.array([1.155, 1.405, 1.0])
print("cable vectors\n", cable_vectors(geom, c))
print("lengths", cable_lengths(geom, c))

# %%
# Jacobian rows are unit vectors from each anchor to the mass.  By symmetry
# the horizontal components cancel.
J = jacobian(geom, c)
print(J)
print("column sums", J.sum(axis=0))

# %%
# Rates of change of cable length are J @ velocity.  A quick finite-difference
# check:
v = np.array([0.1, -0.2, 0.05])
h = 1e-6
print(J @ v, (cable_lengths(geom, c + h * v) - cable_lengths(geom, c - h * v)) / (2 * h))

# %%
# Tensions that balance gravity.  At the center all four are equal.
sol = static_equilibrium_tensions(geom, params, c)
print("tensions", sol.tensions, "residual", sol.residual)
print("acceleration with these tensions", acceleration(geom, params, c, sol.tensions))

# %%
# Close to one corner the nearest cable carries most of the load.
corner = np.array([0.3, 0.3, 1.0])
print(static_equilibrium_tensions(geom, params, corner).tensions)

# %%
# A map of the largest equilibrium tension over a horizontal slice shows how
# the load grows toward the frame edges.
xs = np.linspace(0.3, 2.01, 7)
ys = np.linspace(0.3, 2.51, 7)
grid = np.array([[static_equilibrium_tensions(geom, params, [x, y, 1.5]).tensions.max()
                  for x in xs] for y in ys])
np.set_printoptions(precision=2, suppress=True)
print(grid)
