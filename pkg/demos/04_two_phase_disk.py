"""Maximize <c, x> over the unit disk with c = (3, 4).

With a = 20 the projection phase walks out from the origin in short steps;
once the circle is reached the active set stays put and
the Newton phase finishes there.
"""
import numpy as np

from activenewton.problems import build, builtin
from activenewton.solver import IdentifyOptions, solve_two_phase

prob = build(builtin("disk-nlp"))
rep = solve_two_phase(prob, np.zeros(2), identify=IdentifyOptions(a=20.0))
for r in rep.history:
    print(f"{r.k:3d} {r.phase.value:8s} u={np.round(r.u, 10)} "
          f"active={sorted(r.active_set)} err={r.dist_to_solution:.2e}")
print(rep.status.value, "switch at", rep.switch_iteration, "lambda", rep.lambda_)

# a random orthant VI, checked against exhaustive enumeration
from activenewton.problems import lcp_bruteforce, random_orthant_vi
spec = random_orthant_vi(5, seed=1)
A, b = np.array(spec.params["A"]), np.array(spec.params["b"])
rep = solve_two_phase(build(spec), np.zeros(5), identify=IdentifyOptions(a=np.linalg.norm(A, 2)))
print("random VI:", rep.status.value, "max diff vs oracle",
      np.abs(rep.u - lcp_bruteforce(A, b)).max())
