"""
Max-min power allocation in one NOMA cluster
============================================

The SBS broadcasts a superposed signal to the UAV, and the UAV relays it to
the cluster.  Both hops share the same max-min SIDNR, so the allocation
reduces to picking the smaller of two per-phase optima.
"""

from ccrnoma import PowerCaps, allocate_cluster, link_budget, reference_scenario
from ccrnoma.link import broadcast_sidnr, relay_sidnr

sc = reference_scenario("four_users")
budget = link_budget(sc)

# Users are ordered weakest first inside the cluster state.
state = budget.cluster_state(0, [0, 1, 2, 3])
print("decoding order (user ids):", state.user_order)

caps = PowerCaps(float(budget.phi1[0]), float(budget.phi2[0]))
res = allocate_cluster(state, caps)
print(f"broadcast optimum {res.gamma1:.2f}, relay optimum {res.gamma2:.2f}")
print(f"common SIDNR {res.gamma_star:.2f}, max-min rate {res.maxmin_rate / 1e6:.3f} Mbit/s")

# Every user sees the same SIDNR in both phases.
full = state.with_fractions(res.alpha, res.beta)
for n, user in enumerate(state.user_order):
    print(f"user {user}: alpha={res.alpha[n]:.4f} beta={res.beta[n]:.4f} "
          f"sidnr=({broadcast_sidnr(full, n):.3f}, {relay_sidnr(full, n):.3f})")

# The binding phase spends its whole budget; the other one keeps slack.
print(f"sum alpha {sum(res.alpha):.4f} of {caps.phi1:.4f}, sum beta {sum(res.beta):.4f} of {caps.phi2:.4f}")
