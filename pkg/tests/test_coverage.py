import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate, stats

from ccrnoma.coverage import (
    CdfParams,
    cdf_delta_term,
    cdf_params,
    cdf_upsilon_term,
    cluster_coverage,
    coverage_allocation,
    coverage_probability,
    monte_carlo_coverage,
    optimal_coverage,
    sidnr_cdf,
    sidnr_thresholds,
)
from ccrnoma.link import link_budget
from ccrnoma.scenario import FadingShapes, reference_scenario, rng_stream


def params(x, y, z, calE, calS, calI, lam, A=1.0):
    calV, calU = (0.0, 0.0) if math.isinf(lam) else (calS / lam, calI / lam)
    return CdfParams(x, y, z, A, calE, calS, calI, calV, calU, lam)


def random_params(rng):
    x, y, z = (int(v) for v in rng.integers(1, 5, 3))
    return params(
        x, y, z,
        calE=float(rng.uniform(0, 0.3)),
        calS=float(rng.uniform(0, 0.5)),
        calI=float(rng.uniform(0, 0.8)),
        lam=float(rng.uniform(0.2, 2.0)),
    )


def gamma_rv(m):
    return stats.gamma(a=m, scale=1.0 / m)


# -- thresholds ------------------------------------------------------------


def test_thresholds():
    assert sidnr_thresholds(0.0, 0.5, 180e3) == (0.0, 0.0)
    assert sidnr_thresholds(90e3, 0.5, 180e3) == pytest.approx((1.0, 1.0))
    g, _ = sidnr_thresholds(1.3e6, 0.5, 180e3)
    assert g == pytest.approx(2 ** (1.3e6 / 90e3) - 1, rel=1e-12)
    assert g == pytest.approx(22300, rel=5e-3)


def test_threshold_zero_share_is_infinite():
    g1, g2 = sidnr_thresholds(1e5, 0.0, 180e3)
    assert math.isinf(g1) and math.isfinite(g2)
    g1, g2 = sidnr_thresholds(1e5, 1.0, 180e3)
    assert math.isinf(g2)
    with pytest.raises(ValueError):
        sidnr_thresholds(1e5, 0.5, 0.0)


# -- Delta -----------------------------------------------------------------


@pytest.mark.parametrize("x", [1, 2, 3, 5])
def test_delta_uncapped_no_pbs(x):
    c = 0.37
    p = params(x, 2, 2, calE=0.12, calS=c - 0.12, calI=0.0, lam=math.inf)
    series = sum((x * c) ** q / math.factorial(q) for q in range(x))
    assert cdf_delta_term(p) == pytest.approx(1 - math.exp(-x * c) * series, rel=1e-12)


def test_delta_zero_threshold():
    assert cdf_delta_term(params(2, 3, 2, 0.0, 0.0, 0.0, lam=0.7)) == 0.0


def test_delta_matches_double_integral():
    rng = np.random.default_rng(0)
    for _ in range(8):
        p = random_params(rng)
        fx, fz = gamma_rv(p.x_m), gamma_rv(p.z_m)
        c = p.calE + p.calS
        inner, _ = integrate.dblquad(
            lambda xv, zv: fx.pdf(xv) * fz.pdf(zv),
            0, np.inf, 0, lambda zv: zv * p.calI + c, epsabs=1e-12, epsrel=1e-12,
        )
        expected = inner * gamma_rv(p.y_m).cdf(p.Lambda)
        assert cdf_delta_term(p) == pytest.approx(expected, abs=1e-8)


# -- Upsilon ---------------------------------------------------------------


def test_upsilon_vanishes_without_cap_terms():
    # with calU = calV = calE = 0 the event X < 0 is empty
    p = CdfParams(2, 2, 2, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.4)
    assert cdf_upsilon_term(p) == pytest.approx(0.0, abs=1e-12)


def test_upsilon_vanishes_without_cap():
    p = params(2, 2, 2, 0.1, 0.2, 0.3, lam=math.inf)
    assert cdf_upsilon_term(p) == 0.0
    p = params(2, 2, 2, 0.1, 0.2, 0.3, lam=1e6)
    assert cdf_upsilon_term(p) == 0.0


def test_upsilon_matches_monte_carlo():
    rng = np.random.default_rng(1)
    draw = rng_stream(0, "monte_carlo", 99)
    for _ in range(4):
        p = random_params(rng)
        hits = 0
        n, chunk = 10_000_000, 1_000_000
        for _ in range(n // chunk):
            X = draw.gamma(p.x_m, 1 / p.x_m, chunk)
            Y = draw.gamma(p.y_m, 1 / p.y_m, chunk)
            Z = draw.gamma(p.z_m, 1 / p.z_m, chunk)
            hits += int(np.count_nonzero((X < Z * Y * p.calU + Y * p.calV + p.calE) & (Y > p.Lambda)))
        est = hits / n
        se = math.sqrt(est * (1 - est) / n)
        assert abs(cdf_upsilon_term(p) - est) <= 3 * se + 1e-12


def test_delta_plus_upsilon_in_unit_interval():
    rng = np.random.default_rng(2)
    for _ in range(200):
        p = random_params(rng)
        f = cdf_delta_term(p) + cdf_upsilon_term(p)
        assert -1e-9 <= f <= 1 + 1e-9


# -- CDF -------------------------------------------------------------------


def reference_state(fading=FadingShapes(), **imp):
    sc = reference_scenario("itc_power")
    sc = sc.replace(impairments=replace(sc.impairments, fading_m=fading, **imp))
    sc = sc.replace(budget=replace(sc.budget, p_sbs_dbm=110.0, p_uav_dbm=110.0))
    return link_budget(sc).cluster_state(0, [0, 1])


def test_cdf_zero_threshold_and_margin():
    st = reference_state()
    alloc = coverage_allocation(st)
    phase, v = st.relay[1], alloc.beta[1]
    assert sidnr_cdf(cdf_params(phase, v, 0.0, 0.0, st.fading)) == 0.0
    sc = reference_scenario("two_users")
    sc = sc.replace(impairments=replace(sc.impairments, hi_level_phi=0.05))
    st_hi = link_budget(sc).cluster_state(0, [0, 1])
    alloc = coverage_allocation(st_hi)
    phase, v = st_hi.relay[1], alloc.beta[1]
    limit = v / phase.hi_var
    assert sidnr_cdf(cdf_params(phase, v, 0.0, limit * (1 - 1e-6), st_hi.fading)) > 0.999
    assert sidnr_cdf(cdf_params(phase, v, 0.0, limit * 1.01, st_hi.fading)) == 1.0


def test_cdf_nondecreasing():
    st = reference_state(FadingShapes(3, 2, 1))
    alloc = coverage_allocation(st)
    for pos in range(2):
        phase, v = st.relay[pos], alloc.beta[pos]
        sic = sum(alloc.beta[pos + 1:])
        lam = phase.itc_ratio / sum(alloc.beta)
        vals = [sidnr_cdf(cdf_params(phase, v, sic, g, st.fading, lam))
                for g in np.linspace(0, 1.2 * alloc.gamma_star, 40)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def sampled_sidnr(phase, v, sic, lam, shapes, n, rng):
    X = phase.est_scale * rng.gamma(shapes.x, 1 / shapes.x, n)
    Y = rng.gamma(shapes.y, 1 / shapes.y, n)
    Z = rng.gamma(shapes.z, 1 / shapes.z, n)
    back = np.maximum(1.0, Y / lam)
    return X * v / (X * (sic + phase.hi_var) + phase.err_power_E + back * (Z * phase.pbs_interf_I + phase.norm_noise))


def test_cdf_matches_empirical_sidnr():
    st = reference_state()
    alloc = coverage_allocation(st)
    rng = rng_stream(3, "monte_carlo")
    for pos in range(2):
        for phase, frac in ((st.broadcast, alloc.alpha), (st.relay[pos], alloc.beta)):
            v, sic = frac[pos], sum(frac[pos + 1:])
            lam = phase.itc_ratio / sum(frac)
            s = sampled_sidnr(phase, v, sic, lam, st.fading, 1_000_000, rng)
            for g in alloc.gamma_star * np.array([0.2, 0.5, 0.8, 1.0, 1.3]):
                F = sidnr_cdf(cdf_params(phase, v, sic, g, st.fading, lam))
                assert abs(F - np.mean(s < g)) <= 0.005


# -- coverage ----------------------------------------------------------------


def test_coverage_corners():
    st = reference_state()
    alloc = coverage_allocation(st)
    for n in range(2):
        assert coverage_probability(st, alloc, 0.0, n).p_e2e == 1.0
        assert coverage_probability(st, alloc, 1e9, n).p_e2e == 0.0


def test_coverage_result_is_product():
    st = reference_state()
    for r in optimal_coverage(st, 0.9 * coverage_allocation(st).maxmin_rate):
        assert r.p_e2e == pytest.approx(r.p_phase1 * r.p_phase2, rel=1e-15)
        assert 0 <= r.p_e2e <= 1
        assert r.method == "analytic"


def test_coverage_nonincreasing_in_rbar():
    st = reference_state()
    alloc = coverage_allocation(st)
    grid = np.linspace(0, 1.5 * alloc.maxmin_rate, 60)
    for n in range(2):
        vals = [coverage_probability(st, alloc, r, n).p_e2e for r in grid]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_coverage_increases_with_m():
    covs = []
    for m in (1, 2, 4):
        st = reference_state(FadingShapes(m, m, m))
        covs.append(min(r.p_e2e for r in optimal_coverage(st, 1.3e6)))
    assert covs[0] < covs[1] < covs[2]


def test_monte_carlo_corners_and_seed():
    st = reference_state()
    alloc = coverage_allocation(st)
    r0 = monte_carlo_coverage(st, alloc, 0.0, 1000, rng_stream(0, "monte_carlo"))
    assert r0.p_e2e == 1.0 and r0.mc_stderr == 0.0
    r1 = monte_carlo_coverage(st, alloc, 1e9, 1000, rng_stream(0, "monte_carlo"))
    assert r1.p_e2e == 0.0
    a = monte_carlo_coverage(st, alloc, 1e6, 5000, rng_stream(1, "monte_carlo"))
    b = monte_carlo_coverage(st, alloc, 1e6, 5000, rng_stream(1, "monte_carlo"))
    assert a == b
    with pytest.raises(ValueError):
        monte_carlo_coverage(st, alloc, 1e6, 0, rng_stream(1, "monte_carlo"))


def test_monte_carlo_grid_agreement():
    fadings = [FadingShapes(1, 1, 1), FadingShapes(2, 1, 3), FadingShapes(3, 3, 2), FadingShapes(4, 2, 1),
               FadingShapes(2, 4, 4)]
    for i, fad in enumerate(fadings):
        st = reference_state(fad, hi_level_phi=0.01 * i)
        alloc = coverage_allocation(st)
        for j, frac in enumerate((0.4, 0.7, 0.9, 1.0, 1.1)):
            rbar = frac * alloc.maxmin_rate
            an = coverage_probability(st, alloc, rbar, 0).p_e2e
            mc = monte_carlo_coverage(st, alloc, rbar, 200_000, rng_stream(7, "monte_carlo", i, j))
            assert abs(an - mc.p_e2e) <= 3 * mc.mc_stderr + 1e-6


def test_unreachable_threshold_short_circuits():
    st = reference_state()
    alloc = coverage_allocation(st)
    # the weakest user cannot beat its SIC interference ratio even noiselessly
    ratio = alloc.beta[0] / alloc.beta[1]
    assert cdf_params(st.relay[0], alloc.beta[0], alloc.beta[1], ratio * 1.01, st.fading) is None
    assert sidnr_cdf(None) == 1.0


def test_cluster_coverage_covers_members():
    st = reference_state()
    res = cluster_coverage(st, coverage_allocation(st), 1e6)
    assert len(res) == st.size
