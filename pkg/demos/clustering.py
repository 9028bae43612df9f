"""
User clustering with bottleneck assignment
==========================================

Users join clusters one round at a time.  Each round solves a linear
bottleneck assignment on the cost of adding every unassigned user to every
channel, which keeps the worst cluster as good as possible.
"""

import time

from ccrnoma import cluster_and_assign, exhaustive_assignment_oracle, link_budget, lba_solve, reference_scenario
from ccrnoma.cli import with_hotspot_users

# The threshold solver on its own: the answer is the diagonal, bottleneck 0.8.
print(lba_solve([[0.9, 0.5], [0.4, 0.8]]))

sc = with_hotspot_users(reference_scenario("four_users"), 12).with_channels(4)
res = cluster_and_assign(None, sc, "rate")
for k, members in enumerate(res.clusters):
    print(f"channel {k}: users {members} rate {res.cluster_metrics[k] / 1e6:.3f} Mbit/s")
print(f"worst cluster {res.min_metric / 1e6:.4f} Mbit/s")

# Small instances can be checked against full enumeration.
small = with_hotspot_users(reference_scenario("four_users"), 6).with_channels(3)
b = link_budget(small)
got = cluster_and_assign(None, small, "rate", budget=b).min_metric
best = exhaustive_assignment_oracle(None, small, "rate", budget=b).min_metric
print(f"heuristic {got:.1f} vs exhaustive {best:.1f} bit/s")

big = with_hotspot_users(reference_scenario("four_users"), 200).with_channels(200)
t = time.perf_counter()
cluster_and_assign(None, big, "coverage")
print(f"K=N=200 clustered in {time.perf_counter() - t:.3f} s")
