"""Merit functions for the VI on the orthant with F(u) = u - (1,-1).

The solution is (1,0).  The regularized gap needs feasible points; the
D-gap does not and is nonnegative everywhere.
"""
import numpy as np

from activenewton.geneq import d_gap, natural_residual, regularized_gap
from activenewton.problems import build, builtin

prob = build(builtin("orthant-vi"))
for u in ([1.0, 0.0], [2.0, 0.0], [0.0, 0.0], [1.0, 1.0]):
    print(f"u={u}  residual {natural_residual(prob, 1.0, u):.3f}"
          f"  theta_1 {regularized_gap(prob, 1.0, u):.3f}"
          f"  dgap {d_gap(prob, 1.0, 0.5, u):.3f}")

# D-gap over a grid: its minimum is zero, attained only at the solution
g = np.linspace(-2, 3, 101)
vals = np.array([[d_gap(prob, 1.0, 0.5, [x, y]) for y in g] for x in g])
i, j = np.unravel_index(vals.argmin(), vals.shape)
print("grid min", vals.min(), "at", (g[i], g[j]))
