"""
Contact sets of a cone
======================

Slide paraboloids of growing opening under and over a cone and watch
how much of the unit disc they fail to touch.
"""

import numpy as np

from parabolab import build_ball_grid, make_case
from parabolab.contact import contact_set

spec = build_ball_grid(2, 129)
u = make_case("cone").sample(spec)

# the cone is convex, so paraboloids from below touch it almost everywhere,
# while from above they miss a disc around the tip
for kappa in [1, 4, 16, 64]:
    lower = contact_set(u, kappa, direction="lower")
    upper = contact_set(u, kappa, direction="upper")
    print(f"kappa={kappa:3d}  |B1 \\ T-|={lower.complement_measure():.4f}"
          f"  |B1 \\ T+|={upper.complement_measure():.4f}")

# where exactly does the upper contact set stop near the tip?
upper = contact_set(u, 16.0, direction="upper")
missed = ~upper.mask & spec.mask & (spec.radius < 0.5)
print("largest missed radius near the tip:", spec.radius[missed].max())

# %%
# Each contact node remembers the vertex of its touching paraboloid.
idx = spec.index_of((0.5, 0.25))
print("vertex for (0.5, 0.25):", upper.vertex_of(idx))
