"""
Placing the UAV
===============

The fitness of a UAV position is the worst cluster metric after clustering.
Here the search runs on the vertical plane through the SBS and the hot-spot
center, first exhaustively and then by simulated annealing.
"""

import numpy as np

from ccrnoma import reference_scenario, rng_stream, simulated_annealing
from ccrnoma.deploy import axis_space, grid_sweep

sc = reference_scenario("two_users")

d = np.arange(0.0, 1001.0, 20.0)
h = np.arange(10.0, 1001.0, 20.0)
grid = grid_sweep(sc, d, h)
i, j = np.unravel_index(np.nanargmax(grid), grid.shape)
print(f"grid optimum d={d[i]:.0f} m, H={h[j]:.0f} m, {grid[i, j] / 1e6:.4f} Mbit/s")

# Low altitude loses line of sight, high altitude loses path gain.
print("best rate per height:", {int(hv): round(float(np.nanmax(grid[:, jj])) / 1e6, 3)
                                for jj, hv in enumerate(h) if jj % 10 == 0})

space = axis_space(sc, (0.0, 1000.0), (10.0, 1000.0), iterations=500)
res = simulated_annealing(sc, space, rng_stream(sc.rng_seed, "annealing"))
accepted = sum(e.accepted for e in res.trace)
print(f"annealing: {res.best_c}, {res.best_fitness / 1e6:.4f} Mbit/s, "
      f"{accepted}/{len(res.trace)} moves accepted, T0={res.t0:.3g}")
