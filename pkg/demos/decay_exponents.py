"""
Decay of contact-set complements
================================

Fit the power law |B1 \\ T_t| ~ t^(-sigma) for the cone and a quadratic,
and cross-check the cone against the brute-force minimal-opening oracle.
"""

import numpy as np

from parabolab import build_ball_grid, make_case
from parabolab.measure import decay_profile
from parabolab.oracles import decay_from_openings, minimal_opening

spec = build_ball_grid(2, 257)

cone = decay_profile(make_case("cone").sample(spec), "upper")
quad = decay_profile(make_case("quadratic", a=1.0).sample(spec), "lower")

print(" k      t   cone (upper)   quadratic (lower)")
for (k, t, _, cu, _), (_, _, ql, _, _) in zip(cone.rows(), quad.rows()):
    print(f"{k:2d} {t:6.0f}   {cu:12.6f}   {ql:12.6f}")

# the cone misses a disc of radius ~ 1/t around its tip, hence sigma ~ 2;
# the quadratic only loses a boundary strip of width ~ 1/t, hence sigma ~ 1
print(f"cone sigma = {cone.sigma:.3f} on steps {cone.fit_steps}")
print(f"quadratic sigma = {quad.sigma:.3f} on steps {quad.fit_steps}")

# %%
# A coarse grid is enough for the oracle, which tries every node pair.
small = build_ball_grid(2, 65)
u = make_case("cone").sample(small)
openings = minimal_opening(u, 2.0 ** (np.arange(9) / 2), "upper")
print("oracle:", decay_from_openings(openings, small, [1, 2, 4, 8, 16]))
