"""Local rates of the Newton phase.

Scalar Newton and the projected Newton scheme on a subspace show the
expected quadratic error law.  On the sphere VI and the disk NLP a
single step followed by projection is already exact, so there is no
tail to fit an order to.
"""
import numpy as np

from activenewton.cli import rate_table
from activenewton.problems import build, builtin
from activenewton.solver import perturbed_start, problem_manifold, run_newton_phase

for name in ("scalar-root", "subspace-newton", "sphere-vi", "disk-nlp"):
    for row in rate_table(builtin(name), [1e-1, 1e-2, 1e-3]):
        print(f"{name:16s} d={row['distance']:.0e} iters={row['iterations_to_1e-12']} "
              f"order={row['fitted_order']} ratio={row['max_ratio']}")

# the one-step effect on the sphere: w = p/<p,u> projects to p/|p|
prob = build(builtin("sphere-vi"))
M = problem_manifold(prob)
u, lam = perturbed_start(prob, M, 0.3, np.random.default_rng(1))
rep = run_newton_phase(prob, M, u, lam)
print("sphere errors:", [f"{r.dist_to_solution:.1e}" for r in rep.history])
