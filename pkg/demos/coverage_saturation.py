"""
Coverage under an interference temperature constraint
=====================================================

A primary user sits directly below the UAV.  Raising the transmit power helps
until the interference caps bind, after which the radiated power is clipped
and coverage stops improving.
"""

from dataclasses import replace

import numpy as np

from ccrnoma import link_budget, reference_scenario
from ccrnoma.coverage import optimal_coverage
from ccrnoma.scenario import FadingShapes

sc = reference_scenario("itc_power")
print(f"rate threshold {sc.rate_threshold_rbar / 1e6:.2f} Mbit/s, ITC {sc.itc_dbm:.0f} dBm")


def min_coverage(s):
    state = link_budget(s).cluster_state(0, [0, 1])
    return min(r.p_e2e for r in optimal_coverage(state, s.rate_threshold_rbar))


powers = np.arange(80.0, 131.0, 5.0)
print("power_dbm  " + "  ".join(f"m={m}" for m in (1, 2, 4)) + "   phi1    phi2")
for p in powers:
    s = sc.replace(budget=replace(sc.budget, p_sbs_dbm=p, p_uav_dbm=p))
    covs = []
    for m in (1, 2, 4):
        sm = s.replace(impairments=replace(s.impairments, fading_m=FadingShapes(m, m, m)))
        covs.append(min_coverage(sm))
    b = link_budget(s)
    print(f"{p:9.0f}  " + "  ".join(f"{c:.3f}" for c in covs) + f"  {b.phi1[0]:.2e} {b.phi2[0]:.2e}")

# Once the caps are active the radiated powers P*phi are pinned, so the curves
# flatten below full coverage.  Higher m flattens at a higher level.
