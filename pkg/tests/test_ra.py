import math

import numpy as np
import pytest

from _support import beta_by_substitution, random_geometry_state, synthetic_state
from ccrnoma.link import broadcast_sidnr, link_budget, relay_sidnr
from ccrnoma.ra import (
    PowerCaps,
    allocate_batch,
    allocate_cluster,
    grid_oracle_allocate,
    phase1_allocation,
    phase2_allocation,
    phase2_gamma,
    power_caps,
)
from ccrnoma.scenario import reference_scenario


def test_power_caps():
    assert power_caps(1.0, 0.25, 1.0) == 1.0
    assert power_caps(1.0, 1.0, 0.3) == pytest.approx(0.3)
    assert power_caps(2.0, 0.0, 1e-9) == 1.0
    with pytest.raises(ValueError):
        power_caps(0.0, 1.0, 1.0)


def test_power_caps_type_bounds():
    with pytest.raises(ValueError):
        PowerCaps(0.0, 1.0)
    with pytest.raises(ValueError):
        PowerCaps(1.0, 1.2)


def test_phase1_single_user():
    g, a = phase1_allocation(0.5, 1.0, 1)
    assert g == pytest.approx(2.0)
    assert a.tolist() == pytest.approx([1.0])


def test_phase1_two_users():
    g, a = phase1_allocation(1.0, 3.0, 2)
    assert g == pytest.approx(1.0, rel=1e-14)
    assert a.tolist() == pytest.approx([2.0, 1.0], rel=1e-14)


def test_phase1_budget_exhausted():
    rng = np.random.default_rng(0)
    for _ in range(500):
        n = int(rng.integers(1, 9))
        I_r, phi = 10 ** rng.uniform(-6, 0), rng.uniform(0.01, 1)
        _, a = phase1_allocation(I_r, phi, n)
        assert abs(a.sum() - phi) <= 1e-12 * phi


def test_phase1_rejects_bad_input():
    with pytest.raises(ValueError):
        phase1_allocation(0.0, 1.0, 2)
    with pytest.raises(ValueError):
        phase1_allocation(1.0, 1.0, 0)


def test_phase2_two_user_closed_form():
    g, b = phase2_allocation([1.0, 1.0], 2.0)
    assert g == pytest.approx((math.sqrt(12) - 2) / 2, rel=1e-14)
    assert g == pytest.approx(0.7321, abs=1e-4)
    assert b.tolist() == pytest.approx([g + g * g, g], rel=1e-14)
    assert b.sum() == pytest.approx(2.0, rel=1e-14)


def test_phase2_single_user():
    g, b = phase2_allocation([0.25], 1.0)
    assert g == pytest.approx(4.0)
    assert b.tolist() == pytest.approx([1.0])


def test_phase2_bisection_matches_fine_grid():
    # an independent 1-D grid over gamma with fractions built by substitution
    rng = np.random.default_rng(1)
    for _ in range(3):
        I = np.sort(rng.uniform(0.05, 0.3, 4))[::-1]
        phi = 1.0
        g = float(phase2_gamma(I, phi))
        grid = np.arange(0.0, 3.0, 1e-6)
        tails = np.zeros_like(grid)
        total = np.zeros_like(grid)
        for n in range(3, -1, -1):
            b = grid * (tails + I[n])
            tails += b
            total += b
        feasible = grid[total <= phi]
        assert abs(feasible.max() - g) <= 1e-6
        assert sum(beta_by_substitution(I, g)) == pytest.approx(phi, rel=1e-12)


def test_phase2_rejects_nonpositive():
    with pytest.raises(ValueError):
        phase2_allocation([0.1, 0.0], 1.0)


def test_batch_matches_single():
    rng = np.random.default_rng(2)
    for c in (1, 2, 3, 5):
        I_r = 10 ** rng.uniform(-4, -1, 20)
        I_n = 10 ** rng.uniform(-4, -1, (20, c))
        I_n = -np.sort(-I_n, axis=1)
        p1, p2 = rng.uniform(0.1, 1, 20), rng.uniform(0.1, 1, 20)
        g, a, b, rate = allocate_batch(I_r, I_n, p1, p2, 180e3)
        for i in range(20):
            res = allocate_cluster(synthetic_state(I_r[i], I_n[i]), PowerCaps(p1[i], p2[i]))
            assert g[i] == pytest.approx(res.gamma_star, rel=1e-12)
            assert rate[i] == pytest.approx(res.maxmin_rate, rel=1e-12)
            assert a[i].tolist() == pytest.approx(res.alpha, rel=1e-12)
            assert b[i].tolist() == pytest.approx(res.beta, rel=1e-12)


def test_phase1_binding_underspends_relay():
    st = synthetic_state(0.5, [0.01, 0.01])
    res = allocate_cluster(st, PowerCaps(1.0, 1.0))
    assert res.gamma1 < res.gamma2
    assert sum(res.alpha) == pytest.approx(1.0, rel=1e-12)
    assert sum(res.beta) < 1.0


def test_symmetric_phases_both_bind():
    st = synthetic_state(0.2, [0.2])
    res = allocate_cluster(st, PowerCaps(0.7, 0.7))
    assert sum(res.alpha) == pytest.approx(0.7, rel=1e-12)
    assert sum(res.beta) == pytest.approx(0.7, rel=1e-12)


def test_reference_regime_relay_saturates():
    sc = reference_scenario("four_users")
    b = link_budget(sc)
    st = b.cluster_state(0, [0, 1, 2, 3])
    res = allocate_cluster(st, PowerCaps(float(b.phi1[0]), float(b.phi2[0])))
    assert res.gamma2 < res.gamma1
    assert sum(res.beta) == pytest.approx(1.0, rel=1e-12)
    assert sum(res.alpha) < 1.0


def test_equalization_and_lambda():
    rng = np.random.default_rng(3)
    for _ in range(100):
        c = int(rng.integers(1, 7))
        st, b = random_geometry_state(rng, c)
        res = allocate_cluster(st, PowerCaps(float(b.phi1[0]), float(b.phi2[0])))
        full = st.with_fractions(res.alpha, res.beta)
        for n in range(c):
            assert broadcast_sidnr(full, n) == pytest.approx(res.gamma_star, rel=1e-9)
            assert relay_sidnr(full, n) == pytest.approx(res.gamma_star, rel=1e-9)
        assert res.lam == 0.5
        assert res.maxmin_rate == pytest.approx(90e3 * math.log2(1 + res.gamma_star))
        assert sum(res.alpha) <= b.phi1[0] * (1 + 1e-12)
        assert sum(res.beta) <= b.phi2[0] * (1 + 1e-12)
        assert min(abs(sum(res.alpha) - b.phi1[0]) / b.phi1[0], abs(sum(res.beta) - b.phi2[0]) / b.phi2[0]) <= 1e-12
        assert all(v >= 0 for v in res.alpha + res.beta)
        assert res.energy == pytest.approx(sum(res.alpha) + sum(res.beta))


def test_gamma_monotone_in_terms():
    rng = np.random.default_rng(4)
    for _ in range(100):
        c = int(rng.integers(1, 6))
        I_r = float(10 ** rng.uniform(-4, -1))
        I = np.sort(10 ** rng.uniform(-4, -1, c))[::-1]
        caps = PowerCaps(float(rng.uniform(0.1, 0.9)), float(rng.uniform(0.1, 0.9)))
        g0 = allocate_cluster(synthetic_state(I_r, I), caps).gamma_star
        j = int(rng.integers(c))
        I2 = I.copy()
        I2[j] *= 1.5
        assert allocate_cluster(synthetic_state(I_r, I2), caps).gamma_star <= g0 * (1 + 1e-12)
        assert allocate_cluster(synthetic_state(I_r * 1.5, I), caps).gamma_star <= g0 * (1 + 1e-12)
        up = PowerCaps(min(1.0, caps.phi1 * 1.1), min(1.0, caps.phi2 * 1.1))
        assert allocate_cluster(synthetic_state(I_r, I), up).gamma_star >= g0 * (1 - 1e-12)


def test_grid_oracle_single_user():
    st = synthetic_state(0.01, [0.02])
    caps = PowerCaps(0.8, 0.9)
    assert grid_oracle_allocate(st, caps).gamma_star == pytest.approx(allocate_cluster(st, caps).gamma_star, rel=1e-12)


@pytest.mark.parametrize("c", [2, 3])
def test_grid_oracle_close_and_costlier(c):
    rng = np.random.default_rng(10 + c)
    for _ in range(5):
        st, b = random_geometry_state(rng, c)
        caps = PowerCaps(float(b.phi1[0]), float(b.phi2[0]))
        cf = allocate_cluster(st, caps)
        ora = grid_oracle_allocate(st, caps)
        assert ora.gamma_star == pytest.approx(cf.gamma_star, rel=5e-3)
        assert cf.energy <= ora.energy * (1 + 1e-12)


def test_grid_oracle_size_guard():
    with pytest.raises(ValueError):
        grid_oracle_allocate(synthetic_state(0.1, [0.1] * 4), PowerCaps(1, 1))
