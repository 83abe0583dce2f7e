"""
Solving the p-Laplace equation
==============================

Solve Delta_p u = 1 on the unit disc with the boundary values of the
radial solution and compare with the exact answer on three grids.
"""

import numpy as np

from parabolab import build_ball_grid, make_case, solve_plaplace
from parabolab.solver import residual_report

p = 1.5
case = make_case("radial_plaplace", p=p)

errors = []
for m in [65, 129, 257]:
    spec = build_ball_grid(2, m)
    res = solve_plaplace(1.0, case.u, p, spec)
    err = np.nanmax(np.abs(res.u.values - case.sample(spec).values))
    errors.append(err)
    print(f"h=1/{(m - 1) // 2:<4d} iterations={res.iterations:3d}  max error={err:.3e}")

# halving h halves the error
print("ratios:", [round(float(a / b), 2) for a, b in zip(errors, errors[1:])])

# %%
# The discrete solution also satisfies the singular inequalities up to O(h).
rep = residual_report(res.u, 1.0, case.gamma, case.ell)
print(f"{rep.violations} violations among {rep.checked} checked nodes")
