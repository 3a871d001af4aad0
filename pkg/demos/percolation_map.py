"""Draw the open/closed lattice of squares for one configuration.

A square is open when it holds points whose nearest neighbours are close and
whose distances to the next leader shrink by a factor 1 - epsilon.  The map
prints '.' for open and '#' for closed squares; the numbers below compare
the per-point contraction tail with its exact integral and the leading
order expansion.

    python3 demos/percolation_map.py [a] [epsilon]
"""
import sys

from poisson_follower import (ExperimentPlan, Window, build_graph, classify_step0,
                              cluster_statistics, empirical_contraction_tail, p0_analytic,
                              p0_exact, sample_poisson)

a = float(sys.argv[1]) if len(sys.argv) > 1 else 2.0
eps = float(sys.argv[2]) if len(sys.argv) > 2 else 0.01
config = sample_poisson(Window.square(80.0), 1.0, seed=12)
cls = classify_step0(config, build_graph(config), a, eps)
for row in cls.open.T[::-1]:
    print("".join("." if o else "#" for o in row))
stats = cluster_statistics(cls)
print(f"\na = {a:g}, epsilon = {eps:g}: {stats['open_fraction']:.2f} of squares open, "
      f"largest closed cluster {stats['largest_closed_cluster']}")

plan = ExperimentPlan(seed=3, replicas=6, window=Window.square(100.0))
p, se = empirical_contraction_tail(plan, 0, a, eps)
print(f"P(nn < a, rho > 1 - eps): simulated {p:.5f} +- {se:.5f}, "
      f"integral {p0_exact(a, eps):.5f}, expansion {p0_analytic(a, eps):.5f}")
