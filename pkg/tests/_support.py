"""Shared builders for the test suite."""

from __future__ import annotations

import math

import numpy as np

from ccrnoma.link import ClusterLinkState, PhaseLinkState, link_budget
from ccrnoma.scenario import FadingShapes, Position, generate_hotspot_users, reference_scenario


def synthetic_state(I_r: float, I_n, *, bandwidth: float = 180e3) -> ClusterLinkState:
    """Unit-gain cluster whose aggregated terms are exactly ``I_r`` and
    ``I_n`` (thermal noise carries everything)."""

    def phase(noise):
        return PhaseLinkState(
            est_gain_power=1.0, err_power_E=0.0, hi_var=0.0, pbs_interf_I=0.0, norm_noise=noise,
        )

    I_n = tuple(float(x) for x in I_n)
    return ClusterLinkState(
        broadcast=phase(I_r), relay=tuple(phase(x) for x in I_n),
        user_order=tuple(range(len(I_n))), agg_I_r=float(I_r), agg_I_n=I_n,
        fading=FadingShapes(), bandwidth=bandwidth,
    )


def random_geometry_state(rng: np.random.Generator, c: int, base=None):
    """Cluster of ``c`` random hot-spot users with the UAV at a random spot;
    returns (state, budget)."""
    sc = base or reference_scenario("four_users")
    users = generate_hotspot_users(sc.hotspot, c, rng)
    uav = Position(float(rng.uniform(0, 800)), float(rng.uniform(0, 800)), float(rng.uniform(30, 600)))
    sc = sc.with_users(users).with_uav(uav)
    budget = link_budget(sc)
    return budget.cluster_state(0, list(range(c))), budget


def beta_by_substitution(I, gamma):
    """beta from the equal-SIDNR equations solved strongest user first:
    beta_C = gamma I_C, beta_n = gamma (sum_{j>n} beta_j + I_n)."""
    beta = [0.0] * len(I)
    tail = 0.0
    for n in range(len(I) - 1, -1, -1):
        beta[n] = gamma * (tail + I[n])
        tail += beta[n]
    return beta


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def isclose(a, b, tol):
    return math.isclose(a, b, rel_tol=tol, abs_tol=0.0)
