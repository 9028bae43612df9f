"""Closed-form max-min fair power and phase-time allocation for one NOMA
cluster, with a batched version for cost-matrix generation and a grid
search used as a test oracle.

Every user of the cluster is driven to the same SIDNR in both phases.  The
broadcasting phase has a closed form for any cluster size; the relaying
phase has one for up to two users and is solved by bisection beyond that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .link import ClusterLinkState, phase_sidnr

BISECTION_STEPS = 200


@dataclass(frozen=True)
class PowerCaps:
    phi1: float
    phi2: float

    def __post_init__(self):
        for v in (self.phi1, self.phi2):
            if not 0.0 < v <= 1.0:
                raise ValueError(f"power cap must lie in (0, 1], got {v}")


@dataclass(frozen=True)
class AllocationResult:
    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    lam: float
    gamma_star: float
    maxmin_rate: float
    gamma1: float = math.nan
    gamma2: float = math.nan

    @property
    def energy(self) -> float:
        return float(sum(self.alpha) + sum(self.beta))

    @property
    def size(self) -> int:
        return len(self.alpha)


def power_caps(p_per_channel: float, mean_gain_to_pu: float, itc: float) -> float:
    """min(1, ITC / (P g))."""
    if p_per_channel <= 0 or itc <= 0:
        raise ValueError("power and ITC must be positive")
    if mean_gain_to_pu <= 0:
        return 1.0
    return min(1.0, itc / (p_per_channel * mean_gain_to_pu))


# ---------------------------------------------------------------------------
# Phase 1: broadcasting
# ---------------------------------------------------------------------------


def phase1_gamma(I_r, phi1, n_users):
    """(Phi/I_r + 1)^(1/N) - 1, elementwise."""
    I_r = np.asarray(I_r, dtype=float)
    if np.any(I_r <= 0):
        raise ValueError("I_r must be positive")
    return np.expm1(np.log1p(np.asarray(phi1, dtype=float) / I_r) / n_users)


def alpha_fractions(I_r, gamma, n_users: int) -> np.ndarray:
    """alpha_n = I_r gamma (1 + gamma)^(N - n), n = 1..N; trailing axis N."""
    I_r = np.asarray(I_r, dtype=float)[..., None]
    gamma = np.asarray(gamma, dtype=float)[..., None]
    expo = np.arange(n_users - 1, -1, -1, dtype=float)
    return I_r * gamma * (1.0 + gamma) ** expo


def phase1_allocation(I_r: float, phi1: float, n_users: int):
    """Optimal common broadcasting SIDNR and the fractions exhausting Phi1."""
    if n_users < 1:
        raise ValueError("cluster must have at least one user")
    g = float(phase1_gamma(I_r, phi1, n_users))
    return g, alpha_fractions(I_r, g, n_users)


# ---------------------------------------------------------------------------
# Phase 2: relaying
# ---------------------------------------------------------------------------


def beta_fractions(I_list, gamma) -> np.ndarray:
    """beta_n = I_n g + g^2 sum_{j>n} I_j (1+g)^(j-n-1); trailing axis N."""
    I = np.asarray(I_list, dtype=float)
    g = np.asarray(gamma, dtype=float)[..., None]
    n = I.shape[-1]
    out = I * g
    for j in range(1, n):
        # contribution of I_j to every n < j: g^2 I_j (1+g)^(j-n-1)
        expo = (j - 1 - np.arange(j, dtype=float))
        out[..., :j] += g * g * I[..., j:j + 1] * (1.0 + g) ** expo
    return out


def _beta_sum(I, g):
    return beta_fractions(I, g).sum(axis=-1)


def phase2_gamma(I_list, phi2):
    """Common relaying SIDNR solving sum(beta(gamma)) = Phi2.

    ``I_list`` has trailing axis N (batch dims allowed).  N = 1 and N = 2 use
    the closed forms; larger clusters bisect on [0, Phi2 / min(I)], where
    the budget sum is strictly increasing.
    """
    I = np.asarray(I_list, dtype=float)
    if np.any(I <= 0):
        raise ValueError("every I_n must be positive")
    phi = np.broadcast_to(np.asarray(phi2, dtype=float), I.shape[:-1])
    n = I.shape[-1]
    if n == 1:
        return phi / I[..., 0]
    if n == 2:
        i1, i2 = I[..., 0], I[..., 1]
        s = i1 + i2
        # (sqrt(4 I2 Phi + s^2) - s) / (2 I2), written without cancellation
        return 2.0 * phi / (np.sqrt(4.0 * i2 * phi + s * s) + s)
    lo = np.zeros_like(phi)
    hi = phi / I.min(axis=-1)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        over = _beta_sum(I, mid) > phi
        hi = np.where(over, mid, hi)
        lo = np.where(over, lo, mid)
        if np.all((hi - lo) <= 4.0 * np.finfo(float).eps * hi):
            break
    return lo


def phase2_allocation(I_list: Sequence[float], phi2: float):
    I = np.asarray(I_list, dtype=float)
    if I.ndim != 1 or I.size < 1:
        raise ValueError("I_list must be a non-empty 1-D sequence")
    g = float(phase2_gamma(I, phi2))
    return g, beta_fractions(I, g)


# ---------------------------------------------------------------------------
# Cluster allocation
# ---------------------------------------------------------------------------


def allocate_batch(I_r, I_n, phi1, phi2, bandwidth: float):
    """Allocate many clusters of equal size at once.

    Shapes: ``I_r``, ``phi1``, ``phi2`` (B,), ``I_n`` (B, C) in decoding
    order.  Returns ``(gamma, alpha, beta, rate)`` where the common SIDNR is
    the smaller of the two phase optima and both fraction sets are evaluated
    at it, so the non-binding phase under-spends its budget.
    """
    I_n = np.atleast_2d(np.asarray(I_n, dtype=float))
    c = I_n.shape[-1]
    g1 = phase1_gamma(I_r, phi1, c)
    g2 = phase2_gamma(I_n, phi2)
    g = np.minimum(g1, g2)
    alpha = alpha_fractions(I_r, g, c)
    beta = beta_fractions(I_n, g)
    rate = 0.5 * bandwidth * np.log2(1.0 + g)
    return g, alpha, beta, rate


def allocate_cluster(link_state: ClusterLinkState, caps: PowerCaps) -> AllocationResult:
    """Max-min fair allocation: equal SIDNR for every user in both phases and
    lambda = 1/2."""
    c = link_state.size
    if c < 1:
        raise ValueError("cluster must be non-empty")
    g1 = float(phase1_gamma(link_state.agg_I_r, caps.phi1, c))
    g2 = float(phase2_gamma(np.asarray(link_state.agg_I_n), caps.phi2))
    g = min(g1, g2)
    alpha = alpha_fractions(link_state.agg_I_r, g, c)
    beta = beta_fractions(np.asarray(link_state.agg_I_n), g)
    return AllocationResult(
        alpha=tuple(float(a) for a in alpha),
        beta=tuple(float(b) for b in beta),
        lam=0.5,
        gamma_star=g,
        maxmin_rate=0.5 * link_state.bandwidth * math.log2(1.0 + g),
        gamma1=g1,
        gamma2=g2,
    )


# ---------------------------------------------------------------------------
# Grid-search oracle
# ---------------------------------------------------------------------------


def _simplex_face(c: int, steps: int) -> np.ndarray:
    """Integer compositions of ``steps`` into ``c`` nonnegative parts."""
    if c == 1:
        return np.array([[steps]])
    if c == 2:
        a = np.arange(steps + 1)
        return np.stack([a, steps - a], axis=1)
    a, b = np.meshgrid(np.arange(steps + 1), np.arange(steps + 1), indexing="ij")
    keep = a + b <= steps
    a, b = a[keep], b[keep]
    return np.stack([a, b, steps - a - b], axis=1)


def _phase_min_sidnr(frac: np.ndarray, interference_noise: np.ndarray) -> np.ndarray:
    """min_n v_n / (sum_{j>n} v_j + I_n) for rows of ``frac``."""
    tail = np.cumsum(frac[:, ::-1], axis=1)[:, ::-1] - frac
    return (frac / (tail + interference_noise[None, :])).min(axis=1)


def _grid_search_phase(I_vec, budget, grid_step, levels):
    """Maximize the minimum SIDNR of one phase on the face sum(v) = budget.

    Every SIDNR increases when all fractions are scaled up, so the optimum
    spends the whole budget.  A uniform grid of step ``grid_step * budget``
    is searched exhaustively, then the search repeats on a finer grid
    around the incumbent ``levels - 1`` more times.
    """
    c = len(I_vec)
    if c == 1:
        v = np.array([budget])
        return float(budget / I_vec[0]), v
    steps = int(round(1.0 / grid_step))
    base = _simplex_face(c, steps).astype(float) / steps
    center = None
    width = 1.0
    best_v, best_g = None, -np.inf
    for level in range(levels):
        if center is None:
            cand = base * budget
        else:
            # local grid on the face around the incumbent; scaling by c lets
            # every component move by at least +-width
            local = (base - 1.0 / c) * (c * width) * budget
            cand = center[None, :] + local
            cand = cand[(cand >= 0).all(axis=1)]
        g = _phase_min_sidnr(cand, I_vec)
        i = int(np.argmax(g))
        if g[i] >= best_g:
            best_g, best_v = float(g[i]), cand[i].copy()
        center = best_v
        width *= 4.0 * grid_step * c
    return best_g, best_v


def grid_oracle_allocate(
    link_state: ClusterLinkState, caps: PowerCaps, grid_step: float = 1e-3, levels: int = 4
) -> AllocationResult:
    """Exhaustive grid search over the alpha and beta simplices maximizing
    the minimum end-to-end SIDNR.

    Evaluates SIDNRs directly from the link state; it never calls the closed
    forms.  The two phases share no variables, so each is searched on its
    own and the end-to-end optimum is the smaller phase optimum.
    """
    c = link_state.size
    if c > 3:
        raise ValueError("grid oracle supports clusters of at most 3 users")
    g1, alpha = _grid_search_phase(np.array([link_state.agg_I_r] * c), caps.phi1, grid_step, levels)
    g2, beta = _grid_search_phase(np.asarray(link_state.agg_I_n), caps.phi2, grid_step, levels)
    state = link_state.with_fractions(alpha, beta)
    s1 = min(phase_sidnr(state.broadcast, n) for n in range(c))
    s2 = min(phase_sidnr(state.relay[n], n) for n in range(c))
    g = min(s1, s2)
    return AllocationResult(
        alpha=tuple(float(a) for a in alpha),
        beta=tuple(float(b) for b in beta),
        lam=0.5,
        gamma_star=g,
        maxmin_rate=0.5 * link_state.bandwidth * math.log2(1.0 + g),
        gamma1=g1,
        gamma2=g2,
    )
