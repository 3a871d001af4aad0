"""Estimate how often agents end up in mutual pairs, and compare with theory.

The fraction of agents that are mutual nearest neighbours has a closed form;
order-1 pairs (formed after one step) come from simulation and from an
importance-sampled integral.  Replica counts here are small so the script
runs in seconds; the acceptance suite uses the full 40 x 142^2 design.

    python3 demos/pair_frequencies.py [replicas]
"""
import sys

from poisson_follower import (ExperimentPlan, TABLE_KINDS, Window, beta_refinement,
                              beta_upper_type1, density_order0_closed_form,
                              estimate_frequencies, frequency_order1_type1)

replicas = int(sys.argv[1]) if len(sys.argv) > 1 else 8
plan = ExperimentPlan(seed=1, replicas=replicas, window=Window.square(100.0))
print(f"{replicas} replicas on a 100 x 100 window, guard margin {plan.margin:g}\n")
for e in estimate_frequencies(plan, TABLE_KINDS):
    lo, hi = e.ci95
    print(f"  {e.kind.value:26s} {e.mean:.5f}  95% CI [{lo:.5f}, {hi:.5f}]")

print(f"\nclosed form for order-0 pairs: {density_order0_closed_form():.5f}")

# The integral over the domain D counts both orders of the two followers;
# the refinements remove configurations spoiled by an extra point.
beta = beta_upper_type1(samples=1_000_000, seed=2)
refs = [beta_refinement(i, samples=1_000_000, seed=2 + i) for i in (1, 2, 3)]
print(f"integral over D: {beta.value:.5f} +- {beta.std_error:.5f}")
for i, r in enumerate(refs, 1):
    print(f"  refinement {i}: {r.value:.2e} +- {r.std_error:.1e} ({r.hits} non-zero samples)")
f = frequency_order1_type1([beta, *refs])
print(f"half the refined integral: {f.value:.5f} +- {f.std_error:.5f}")
