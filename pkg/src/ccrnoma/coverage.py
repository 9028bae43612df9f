"""Coverage probability of cluster members over Nakagami-m fading with an
instantaneous interference-temperature cap, plus a Monte Carlo estimator.

For one phase, the SIDNR of a user is

    X v / (X (sic + phi^2) + E + Z I_p + noise)

with X the estimated serving power, Z the PBS interference power and Y the
fading towards the primary user.  The transmitter radiates ``P^k sum(v)``;
when ``P^k sum(v) ell_PU Y`` exceeds the ITC it backs off to the ITC, which
multiplies the interference and noise terms by ``Y / Lambda`` with
``Lambda = ITC / (P^k sum(v) ell_PU)``.  Outage splits into an uncapped part
(``Y < Lambda``, closed form) and a capped part evaluated by 1-D adaptive
quadrature over Z of a closed-form inner probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .link import ClusterLinkState, PhaseLinkState
from .ra import AllocationResult, PowerCaps, allocate_cluster
from .scenario import FadingShapes

QUAD_TOL = 1e-8
# Below this Pr[Y > Lambda] the capped term is dropped (it is bounded by it).
CAP_NEGLIGIBLE = 1e-12


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, estimate, bound):
        super().__init__(f"quadrature error bound {bound:.3e} exceeds {QUAD_TOL:.1e} (value {estimate:.6g})")
        self.estimate = estimate
        self.bound = bound


@dataclass(frozen=True)
class CdfParams:
    x_m: int
    y_m: int
    z_m: int
    A: float
    calE: float
    calS: float
    calI: float
    calV: float
    calU: float
    Lambda: float


@dataclass(frozen=True)
class CoverageResult:
    p_phase1: float
    p_phase2: float
    p_e2e: float
    method: str
    mc_stderr: float | None = None


def sidnr_thresholds(rbar: float, lam: float, w: float) -> tuple[float, float]:
    """SIDNR thresholds of the two phases for rate target ``rbar``.

    A phase with zero time share gets an infinite threshold."""
    if w <= 0:
        raise ValueError("bandwidth must be positive")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")

    def thr(share):
        if rbar == 0:
            return 0.0
        if share <= 0:
            return math.inf
        e = rbar / (share * w)
        return math.inf if e > 1000 else math.expm1(e * math.log(2.0))

    return thr(lam), thr(1.0 - lam)


def cdf_params(
    phase: PhaseLinkState,
    v: float,
    sic: float,
    gbar: float,
    shapes: FadingShapes,
    itc_ratio: float | None = None,
) -> CdfParams | None:
    """Normalized CDF parameters of one user/phase; ``None`` when the
    threshold cannot be reached even without noise (certain outage).

    ``itc_ratio`` overrides ``phase.itc_ratio`` as Lambda."""
    A = v - sic * gbar - phase.hi_var * gbar
    if not A > 0 or math.isinf(gbar):
        return None
    scale = gbar / (A * phase.est_scale)
    calE = phase.err_power_E * scale
    calS = phase.norm_noise * scale
    calI = phase.pbs_interf_I * scale
    lam = phase.itc_ratio if itc_ratio is None else itc_ratio
    if math.isinf(lam):
        calV = calU = 0.0
    else:
        calV, calU = calS / lam, calI / lam
    return CdfParams(shapes.x, shapes.y, shapes.z, A, calE, calS, calI, calV, calU, lam)


def _y_below(p: CdfParams) -> float:
    """Pr[Y < Lambda] for Y ~ Gamma(y, y)."""
    if math.isinf(p.Lambda):
        return 1.0
    return float(special.gammainc(p.y_m, p.y_m * p.Lambda))


def _y_above(p: CdfParams) -> float:
    if math.isinf(p.Lambda):
        return 0.0
    return float(special.gammaincc(p.y_m, p.y_m * p.Lambda))


def _negbin_weights(shape: int, ratio: float, count: int) -> np.ndarray:
    """Gamma(shape + l) / (Gamma(shape) l!) * ratio^l for l < count."""
    l = np.arange(count)
    logc = special.gammaln(shape + l) - special.gammaln(shape) - special.gammaln(l + 1)
    with np.errstate(divide="ignore"):
        return np.exp(logc + np.where(l > 0, l * np.log(ratio) if ratio > 0 else -np.inf, 0.0))


def cdf_delta_term(p: CdfParams) -> float:
    """Pr[X < Z calI + calS + calE, Y < Lambda] in closed form.

    Uses the finite Poisson sum of the integer-shape lower incomplete gamma
    and the binomial expansion of (Z calI + c)^q; the Z expectation of each
    term is a negative-binomial weight.
    """
    x, z = p.x_m, p.z_m
    c = p.calE + p.calS
    xc = x * c
    xi = x * p.calI
    # E[Z^l exp(-xi Z)] combined with 1/l!: (z/(z+xi))^z * NB weight
    w_l = _negbin_weights(z, xi / (z + xi), x) * (z / (z + xi)) ** z
    total = 0.0
    for q in range(x):
        for l in range(q + 1):
            total += math.exp(-xc + (q - l) * math.log(xc) - math.lgamma(q - l + 1)) * w_l[l] if xc > 0 \
                else (w_l[l] if q == l else 0.0)
    return _y_below(p) * (1.0 - total)


def upsilon_inner(p: CdfParams, zval) -> np.ndarray:
    """Pr[X < Y (z calU + calV) + calE, Y > Lambda] for fixed PBS power z."""
    zval = np.atleast_1d(np.asarray(zval, dtype=float))
    x, y = p.x_m, p.y_m
    a = zval * p.calU + p.calV
    xa = x * a
    denom = y + xa
    w = p.Lambda * denom
    xe = x * p.calE
    total = np.zeros_like(zval)
    base = y * (np.log(y) - np.log(denom))  # log (y/(y+xa))^y
    for k in range(x):
        for j in range(k + 1):
            if xe > 0:
                pois = math.exp(-xe + (k - j) * math.log(xe) - math.lgamma(k - j + 1))
            else:
                pois = 1.0 if k == j else 0.0
            if pois == 0.0:
                continue
            logc = math.lgamma(y + j) - math.lgamma(y) - math.lgamma(j + 1)
            with np.errstate(divide="ignore"):
                lr = np.where(j > 0, j * (np.log(xa) - np.log(denom)), 0.0) if j > 0 else 0.0
            term = np.exp(logc + base + lr) * special.gammaincc(y + j, w)
            total += pois * term
    return _y_above(p) - total


def _gamma_pdf(shape: int, zval):
    zval = np.asarray(zval, dtype=float)
    with np.errstate(divide="ignore"):
        logf = shape * math.log(shape) + (shape - 1) * np.log(zval) - shape * zval - math.lgamma(shape)
    return np.where(zval > 0, np.exp(logf), 1.0 if shape == 1 else 0.0)


def cdf_upsilon_term(p: CdfParams) -> float:
    """Capped-power part of the CDF: E_Z[Pr[X < YZ calU + Y calV + calE, Y > Lambda]].

    Integrated over z in [0, inf) with z = t/(1-t) and adaptive Gauss-Kronrod
    quadrature to absolute tolerance 1e-8.
    """
    tail = _y_above(p)
    if tail <= CAP_NEGLIGIBLE:
        return 0.0
    z = p.z_m

    def f(t):
        if t >= 1.0:
            return 0.0
        zz = t / (1.0 - t)
        return float(_gamma_pdf(z, zz) * upsilon_inner(p, zz)[0]) / (1.0 - t) ** 2

    val, err = integrate.quad(f, 0.0, 1.0, epsabs=QUAD_TOL, epsrel=0.0, limit=200)
    if err > QUAD_TOL:
        raise QuadratureError(val, err)
    return float(val)


def sidnr_cdf(p: CdfParams | None, which_phase: str | None = None) -> float:
    """F(gbar) = Delta + Upsilon clipped to [0, 1]; ``None`` params mean the
    threshold is unreachable and F = 1.  ``which_phase`` is informational."""
    if p is None:
        return 1.0
    f = cdf_delta_term(p) + cdf_upsilon_term(p)
    return min(1.0, max(0.0, f))


def _radiated_ratio(phase: PhaseLinkState, fractions) -> float:
    """ITC over the mean PU interference actually radiated, P^k sum(v) ell_PU."""
    total = float(sum(fractions))
    if math.isinf(phase.itc_ratio):
        return math.inf
    return phase.itc_ratio / total if total > 0 else math.inf


def _phase_inputs(state: ClusterLinkState, allocation: AllocationResult, n: int):
    """(phase, own fraction, SIC residual, Lambda) for both phases."""
    a, b = allocation.alpha, allocation.beta
    return (
        (state.broadcast, a[n], float(sum(a[n + 1:])), _radiated_ratio(state.broadcast, a)),
        (state.relay[n], b[n], float(sum(b[n + 1:])), _radiated_ratio(state.relay[n], b)),
    )


def coverage_probability(
    state: ClusterLinkState, allocation: AllocationResult, rbar: float, n: int
) -> CoverageResult:
    """Analytic coverage of the user at decoding position ``n``:
    (1 - F1(gbar_s)) (1 - F2(gbar_r)), phases independent."""
    g1, g2 = sidnr_thresholds(rbar, allocation.lam, state.bandwidth)
    probs = []
    for (phase, v, sic, lam), gbar in zip(_phase_inputs(state, allocation, n), (g1, g2)):
        if gbar <= 0:
            probs.append(1.0)
            continue
        probs.append(1.0 - sidnr_cdf(cdf_params(phase, v, sic, gbar, state.fading, lam)))
    return CoverageResult(probs[0], probs[1], probs[0] * probs[1], "analytic")


def cluster_coverage(state: ClusterLinkState, allocation: AllocationResult, rbar: float) -> list[CoverageResult]:
    return [coverage_probability(state, allocation, rbar, n) for n in range(state.size)]


def min_coverage(state: ClusterLinkState, allocation: AllocationResult, rbar: float) -> float:
    return min(r.p_e2e for r in cluster_coverage(state, allocation, rbar))


def coverage_allocation(state: ClusterLinkState) -> AllocationResult:
    """Max-min fair allocation under the mean-channel power caps."""
    caps = PowerCaps(min(1.0, state.broadcast.itc_ratio), min(1.0, state.relay[0].itc_ratio))
    return allocate_cluster(state, caps)


def optimal_coverage(state: ClusterLinkState, rbar: float) -> list[CoverageResult]:
    """Coverage of every member under the max-min fair allocation."""
    return cluster_coverage(state, coverage_allocation(state), rbar)


def _mc_phase_sidnr(phase: PhaseLinkState, v, sic, lam, shapes: FadingShapes, trials, rng):
    x = phase.est_scale * rng.gamma(shapes.x, 1.0 / shapes.x, size=trials)
    zp = rng.gamma(shapes.z, 1.0 / shapes.z, size=trials)
    yk = rng.gamma(shapes.y, 1.0 / shapes.y, size=trials)
    backoff = 1.0 if math.isinf(lam) else np.maximum(1.0, yk / lam)
    den = x * (sic + phase.hi_var) + phase.err_power_E + backoff * (zp * phase.pbs_interf_I + phase.norm_noise)
    return x * v / den


def monte_carlo_coverage(
    state: ClusterLinkState,
    allocation: AllocationResult,
    rbar: float,
    trials: int,
    rng: np.random.Generator,
    n: int = 0,
    chunk: int = 1 << 20,
) -> CoverageResult:
    """Empirical fraction of trials whose end-to-end rate meets ``rbar``.

    Each trial draws X, Y, Z independently for both phases and applies the
    ITC back-off when the instantaneous PU interference exceeds the cap.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    lam, w = allocation.lam, state.bandwidth
    (ph1, v1, s1, l1), (ph2, v2, s2, l2) = _phase_inputs(state, allocation, n)
    ok1 = ok2 = ok = 0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        g1 = _mc_phase_sidnr(ph1, v1, s1, l1, state.fading, m, rng)
        g2 = _mc_phase_sidnr(ph2, v2, s2, l2, state.fading, m, rng)
        r1 = lam * w * np.log2(1.0 + g1)
        r2 = (1.0 - lam) * w * np.log2(1.0 + g2)
        c1, c2 = r1 >= rbar, r2 >= rbar
        ok1 += int(c1.sum())
        ok2 += int(c2.sum())
        ok += int((c1 & c2).sum())
        done += m
    p = ok / trials
    return CoverageResult(ok1 / trials, ok2 / trials, p, "monte_carlo", math.sqrt(p * (1.0 - p) / trials))
