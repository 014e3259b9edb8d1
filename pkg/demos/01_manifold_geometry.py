"""Tangent spaces, normal spaces and nearest points on equation-defined sets."""
import numpy as np

from activenewton.geometry import (
    Manifold, constraint_jacobian, licq_margin, project_to_manifold,
    quadratic, sphere, split_bases,
)

# the unit circle as {x : |x|^2 - 1 = 0}
circle = Manifold(2, [sphere([0.0, 0.0])])
x = np.array([0.6, 0.8])
T, N = split_bases(circle, x)
print("tangent at", x, "->", T.ravel())
print("normal  at", x, "->", N.ravel())
print("J T =", constraint_jacobian(circle, x) @ T)   # zero up to rounding

# LICQ breaks down at the origin, where the gradient vanishes
print("licq margin at (0.6,0.8):", licq_margin(circle, x))
print("licq margin at (0,0):    ", licq_margin(circle, [0.0, 0.0]))

# nearest point on an ellipse x^2/4 + y^2 = 1
ellipse = Manifold(2, [quadratic(np.diag([0.5, 2.0]), None, -1.0)])
for x0 in ([2.3, 0.4], [0.1, 3.0], [-1.0, -1.0]):
    y = project_to_manifold(ellipse, x0)
    Ty, _ = split_bases(ellipse, y)
    print(f"proj {x0} = {y.round(6)}  residual {(Ty.T @ (y - x0)).item():.1e}")
