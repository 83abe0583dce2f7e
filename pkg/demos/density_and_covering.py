"""
Density of contact sets and the covering step
=============================================

Measure how densely T_{KM} fills balls that meet T_K, replay the barrier
construction on a few balls, then test the covering inequality on random sets.
"""

import numpy as np

from parabolab import build_ball_grid, make_case
from parabolab.covering import covering_check, random_instance
from parabolab.density import density_scan, step_pipeline

spec = build_ball_grid(2, 129)
case = make_case("radial_plaplace", p=1.8)
u = case.sample(spec)

scan = density_scan(u, K=1.0, M_candidates=(2, 4, 8), ball_samples=200, seed=0)
print(f"{scan.kept} of {scan.sampled} balls meet T_1")
for M, ratio in scan.min_ratio.items():
    print(f"  M={M:g}: worst density {ratio:.3f}")

# %%
# Barrier and vertex set on three balls.
for rec in step_pipeline(u, K=4.0, M=4.0, ell=case.ell, balls=3, seed=1):
    if rec.status != "ok":
        print(rec.status)
        continue
    b, v = rec.barrier, rec.vertex
    print(f"r={rec.r:.2f} gap {b.gap:.2e} <= {b.bound:.2e}, image inside ball: {v.containment},"
          f" max det {v.det_max:.3f} (cap {v.det_bound:g})")

# %%
# Covering inequality on a random union of balls and its neighbourhood.
for seed in range(5):
    E, F, mu = random_instance(spec, seed)
    v = covering_check(E, F, mu, seed=seed)
    print(f"seed {seed}: hypothesis {v.hypothesis}, |B1\\F|={v.lhs:.3f} <= {v.rhs:.3f}"
          f" (+{v.tol:.3f}): {v.conclusion}")
