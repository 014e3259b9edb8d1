"""The graphical derivative and the coderivative of the normal-space map
describe the same set.

For Phi = N_M the pair (w, z) lies in the tangent space of gph Phi at
(u, v) exactly when (z, -w) lies in its normal space; both reduce to
J w = 0 together with B'(z - H w) = 0.
"""
import numpy as np

from activenewton.varcalc import graph_normal_member, graph_tangent_member
from activenewton.verify import catalog_manifolds, graph_query

rng = np.random.default_rng(0)
for name, M, sample in catalog_manifolds():
    agree = members = 0
    for _ in range(500):
        u = sample(rng)
        v, w, z = graph_query(M, u, rng)
        a = graph_tangent_member(M, u, v, w, z)
        b = graph_normal_member(M, u, v, z, w)
        agree += a == b
        members += a
    print(f"{name:8s} agree {agree}/500   members {members}")

# a direct check on the circle at u = (1,0) with v = 2u
from activenewton.geometry import Manifold, sphere
C = Manifold(2, [sphere([0, 0])])
u, v = np.array([1.0, 0.0]), np.array([2.0, 0.0])
print(graph_tangent_member(C, u, v, [0, 1], [0, 2]))   # True: z = H w along the tangent
print(graph_tangent_member(C, u, v, [1, 0], [0, 2]))   # False: w leaves the circle
