"""Follow one small Poisson configuration through its first step.

Draws a few dozen agents, builds the follower graph, moves everyone halfway
to their leader and lists what happened in between.

    python3 demos/first_step.py [seed]
"""
import sys
from collections import Counter

from poisson_follower import Window, build_graph, detect_all, parties, sample_poisson, step

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 3
config = sample_poisson(Window.square(8.0), intensity=1.0, seed=seed)
g0 = build_graph(config)
print(f"{len(config)} agents in an 8 x 8 window (seed {seed})")

# Every agent points at its nearest neighbour; each party holds one mutual pair.
for p in parties(g0):
    members = " ".join(str(m) for m in sorted(p.members))
    print(f"  party {p.id}: root pair {p.root_pair}, members {members}")

moved = step(config, g0)
g1 = build_graph(moved)
swaps = [(int(i), int(a), int(b)) for i, a, b in
         zip(config.ids, config.ids[g0.leader], config.ids[g1.leader]) if a != b]
print(f"\nafter one step {len(swaps)} agents have a new leader:")
for i, a, b in swaps:
    print(f"  agent {i}: {a} -> {b}")

events = detect_all(g0, g1, config, moved)
counts = Counter(e.kind.value for e in events)
print("\nevents between step 0 and step 1:")
for kind, n in sorted(counts.items()):
    print(f"  {kind:26s} {n}")
