"""Per-user SIDNRs of the broadcasting (SBS -> UAV) and relaying
(UAV -> user) phases, end-to-end rates, and the aggregated
interference-plus-noise terms consumed by the resource allocator.

All phase quantities are normalized by the received serving power
``rho = P^k * ell``: the thermal noise becomes ``sigma^2 / rho`` and PBS
interference ``rho_p / rho * (1 + phi^2)``.

Users inside a cluster are indexed in decoding order: position 0 is the
weakest user (smallest composite access gain) and suffers interference from
every stronger user's power fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .channel import CSI_SCALE_FLOOR, attenuation_arrays, csi_error_variance
from .scenario import FadingShapes, Position, ScenarioConfig


@dataclass(frozen=True)
class PhaseLinkState:
    est_gain_power: float      # |h_est|^2 of the serving link
    err_power_E: float         # zeta * (1 + phi^2)
    hi_var: float              # phi^2
    pbs_interf_I: float        # rho_p / rho * (1 + phi^2)
    norm_noise: float          # sigma^2 / rho
    pbs_gain_power: float = 1.0
    itc_ratio: float = math.inf   # ITC / (P^k * ell towards the PU)
    est_scale: float = 1.0        # mean of |h_est|^2, i.e. max(1 - zeta, floor)
    power_fractions: tuple[float, ...] = ()

    @property
    def interference_noise(self) -> float:
        """hi_var + (E + |h_p|^2 I_p + noise) / |h_est|^2."""
        return self.hi_var + (
            self.err_power_E + self.pbs_gain_power * self.pbs_interf_I + self.norm_noise
        ) / self.est_gain_power


@dataclass(frozen=True)
class ClusterLinkState:
    broadcast: PhaseLinkState
    relay: tuple[PhaseLinkState, ...]
    user_order: tuple[int, ...]
    agg_I_r: float
    agg_I_n: tuple[float, ...]
    fading: FadingShapes = field(default_factory=FadingShapes)
    bandwidth: float = 180e3
    channel: int = 0

    @property
    def size(self) -> int:
        return len(self.user_order)

    def with_fractions(self, alpha: Sequence[float], beta: Sequence[float]) -> "ClusterLinkState":
        alpha = tuple(float(a) for a in alpha)
        beta = tuple(float(b) for b in beta)
        if len(alpha) != self.size or len(beta) != self.size:
            raise ValueError("need one alpha and one beta per cluster member")
        return replace(
            self,
            broadcast=replace(self.broadcast, power_fractions=alpha),
            relay=tuple(replace(r, power_fractions=beta) for r in self.relay),
        )


def phase_sidnr(phase: PhaseLinkState, n: int, fractions=None, pbs_gain_power=None) -> float:
    """SIDNR for decoding the message of user ``n`` (decoding-order index)
    over one phase; SIC removes the weaker users, stronger ones interfere."""
    v = phase.power_fractions if fractions is None else fractions
    if not v:
        raise ValueError("power fractions are not set")
    g = phase.est_gain_power
    zp = phase.pbs_gain_power if pbs_gain_power is None else pbs_gain_power
    sic = float(sum(v[n + 1:]))
    den = g * sic + g * phase.hi_var + phase.err_power_E + zp * phase.pbs_interf_I + phase.norm_noise
    return g * v[n] / den


def broadcast_sidnr(state: ClusterLinkState, n: int) -> float:
    return phase_sidnr(state.broadcast, n)


def relay_sidnr(state: ClusterLinkState, n: int) -> float:
    return phase_sidnr(state.relay[n], n)


def e2e_sidnr(gamma_broadcast: float, gamma_relay: float) -> float:
    return min(gamma_broadcast, gamma_relay)


def user_rate(gamma1: float, gamma2: float, lam: float, w: float) -> float:
    """min(lam W log2(1+g1), (1-lam) W log2(1+g2)) in bit/s."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    if w <= 0:
        raise ValueError("bandwidth must be positive")
    return min(lam * w * math.log2(1.0 + gamma1), (1.0 - lam) * w * math.log2(1.0 + gamma2))


# ---------------------------------------------------------------------------
# Channel realizations and the per-location link budget
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Realizations:
    """Small-scale powers for every link class of a UAV location.

    Arrays are per primary channel ``k`` (leading axis K): ``sr`` SBS->UAV
    estimated power, ``pr`` PBS->UAV, ``rn`` UAV->SU_n and ``pn`` PBS->SU_n
    (shape K x N), ``s_pu``/``r_pu`` SBS->PU_k and UAV->PU_k.
    """

    sr: np.ndarray
    pr: np.ndarray
    rn: np.ndarray
    pn: np.ndarray
    s_pu: np.ndarray
    r_pu: np.ndarray

    def check(self, k: int, n: int) -> None:
        for name in ("sr", "pr", "s_pu", "r_pu"):
            arr = getattr(self, name)
            if arr is None or np.shape(arr) != (k,):
                raise KeyError(f"missing realization for link set {name!r}")
        for name in ("rn", "pn"):
            arr = getattr(self, name)
            if arr is None or np.shape(arr) != (k, n):
                raise KeyError(f"missing realization for link set {name!r}")


def deterministic_realizations(k: int, n: int) -> Realizations:
    """Expected small-scale powers (all ones)."""
    return Realizations(
        sr=np.ones(k), pr=np.ones(k), rn=np.ones((k, n)), pn=np.ones((k, n)),
        s_pu=np.ones(k), r_pu=np.ones(k),
    )


def sample_realizations(scenario: ScenarioConfig, rng: np.random.Generator) -> Realizations:
    """Draw one set of fading powers for every link and channel.

    Serving links (x shape) carry the CSI estimation scaling
    ``max(1 - zeta, 1e-6)``; PU and PBS links use their own shapes.
    """
    k, n = scenario.k_channels, scenario.n_users
    m = scenario.impairments.fading_m
    zs, zr = csi_errors(scenario)

    def g(shape, size):
        return rng.gamma(shape, 1.0 / shape, size=size)

    return Realizations(
        sr=max(1.0 - zs, CSI_SCALE_FLOOR) * g(m.x, k),
        pr=g(m.z, k),
        rn=max(1.0 - zr, CSI_SCALE_FLOOR) * g(m.x, (k, n)),
        pn=g(m.z, (k, n)),
        s_pu=g(m.y, k),
        r_pu=g(m.y, k),
    )


def csi_errors(scenario: ScenarioConfig) -> tuple[float, float]:
    """CSI error variances of the SBS and UAV transmissions."""
    imp = scenario.impairments
    sigma2 = scenario.noise_power_w
    zs = csi_error_variance(imp.csi_theta, imp.csi_mu, scenario.per_channel_power("sbs") / sigma2)
    zr = csi_error_variance(imp.csi_theta, imp.csi_mu, scenario.per_channel_power("uav") / sigma2)
    for z in (zs, zr):
        if z >= 1.0:
            raise ValueError(f"CSI error variance {z} >= 1 exceeds the channel power")
    return zs, zr


@dataclass(frozen=True)
class LinkBudget:
    """Everything the allocator needs for one UAV location, per channel.

    ``I_r`` has shape (K,), ``I_n`` and ``gain`` (K, N); ``phi1``/``phi2``
    are the power caps and ``lam1``/``lam2`` the ITC ratios
    ``ITC / (P^k ell_PU)`` of the two phases.
    """

    scenario: ScenarioConfig
    uav: Position
    broadcast_terms: dict
    relay_terms: dict
    I_r: np.ndarray
    I_n: np.ndarray
    gain: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    lam1: np.ndarray
    lam2: np.ndarray
    realizations: Realizations

    @property
    def k(self) -> int:
        return self.I_r.shape[0]

    @property
    def n(self) -> int:
        return self.I_n.shape[1]

    def order(self, k: int, members: Sequence[int]) -> list[int]:
        """Members sorted by ascending composite access gain (weakest first)."""
        return sorted(members, key=lambda u: (self.gain[k, u], u))

    def cluster_state(self, k: int, members: Sequence[int]) -> ClusterLinkState:
        if not members:
            raise ValueError("cluster must be non-empty")
        order = self.order(k, members)
        bt, rt = self.broadcast_terms, self.relay_terms
        rz = self.realizations
        sc = self.scenario
        broadcast = PhaseLinkState(
            est_gain_power=float(rz.sr[k]),
            err_power_E=bt["E"],
            hi_var=bt["hi_var"],
            pbs_interf_I=bt["I_p"],
            norm_noise=bt["noise"],
            pbs_gain_power=float(rz.pr[k]),
            itc_ratio=float(self.lam1[k]),
            est_scale=bt["est_scale"],
        )
        relay = tuple(
            PhaseLinkState(
                est_gain_power=float(rz.rn[k, u]),
                err_power_E=rt["E"],
                hi_var=rt["hi_var"],
                pbs_interf_I=float(rt["I_p"][u]),
                norm_noise=float(rt["noise"][u]),
                pbs_gain_power=float(rz.pn[k, u]),
                itc_ratio=float(self.lam2[k]),
                est_scale=rt["est_scale"],
            )
            for u in order
        )
        return ClusterLinkState(
            broadcast=broadcast,
            relay=relay,
            user_order=tuple(order),
            agg_I_r=float(self.I_r[k]),
            agg_I_n=tuple(float(self.I_n[k, u]) for u in order),
            fading=sc.impairments.fading_m,
            bandwidth=sc.bandwidth_w,
            channel=k,
        )


def link_budget(
    scenario: ScenarioConfig,
    uav: Position | None = None,
    realizations: Realizations | None = None,
    sampled_caps: bool = False,
) -> LinkBudget:
    """Compute attenuations and the aggregated terms of every user and
    channel for a UAV location.

    Without ``realizations`` the deterministic mode is used (all small-scale
    powers equal to their mean of one).  ``sampled_caps`` applies the
    realized PU-link fading to the power caps as well.
    """
    sc = scenario
    uav = sc.nodes.uav if uav is None else uav
    k, n = sc.k_channels, sc.n_users
    if realizations is None:
        realizations = deterministic_realizations(k, n)
    realizations.check(k, n)
    nodes = sc.nodes
    fc, eta = sc.carrier_fc, sc.attenuation_db
    bh, acc = sc.los_params_backhaul, sc.los_params_access
    c = uav.as_array()
    if c[2] == nodes.sbs.z and c[0] == nodes.sbs.x and c[1] == nodes.sbs.y:
        raise ValueError("UAV cannot sit on the SBS")
    sus = np.array([u.to_list() for u in nodes.secondary_users])
    pus = np.array([p.to_list() for p in nodes.primary_users])

    ell_sr = float(attenuation_arrays(nodes.sbs.as_array(), c, bh, eta, fc, airborne_rx=True))
    ell_pr = float(attenuation_arrays(nodes.pbs.as_array(), c, bh, eta, fc, airborne_rx=True))
    ell_rn = attenuation_arrays(c, sus, acc, eta, fc)
    ell_pn = attenuation_arrays(nodes.pbs.as_array(), sus, acc, eta, fc)
    ell_s_pu = attenuation_arrays(nodes.sbs.as_array(), pus, acc, eta, fc)
    ell_r_pu = attenuation_arrays(c, pus, acc, eta, fc)

    p_s, p_r, p_p = (sc.per_channel_power(x) for x in ("sbs", "uav", "pbs"))
    sigma2 = sc.noise_power_w
    hi = sc.impairments.hi_var
    zs, zr = csi_errors(sc)

    rho_sr, rho_pr = p_s * ell_sr, p_p * ell_pr
    rho_rn, rho_pn = p_r * ell_rn, p_p * ell_pn
    broadcast_terms = {
        "E": zs * (1.0 + hi),
        "hi_var": hi,
        "I_p": rho_pr / rho_sr * (1.0 + hi),
        "noise": sigma2 / rho_sr,
        "est_scale": max(1.0 - zs, CSI_SCALE_FLOOR),
    }
    relay_terms = {
        "E": zr * (1.0 + hi),
        "hi_var": hi,
        "I_p": rho_pn / rho_rn * (1.0 + hi),
        "noise": sigma2 / rho_rn,
        "est_scale": max(1.0 - zr, CSI_SCALE_FLOOR),
    }
    rz = realizations
    bt, rt = broadcast_terms, relay_terms
    I_r = hi + (bt["E"] + rz.pr * bt["I_p"] + bt["noise"]) / rz.sr
    I_n = hi + (rt["E"] + rz.pn * rt["I_p"][None, :] + rt["noise"][None, :]) / rz.rn
    gain = ell_rn[None, :] * rz.rn

    itc = sc.itc_w
    lam1 = itc / (p_s * ell_s_pu)
    lam2 = itc / (p_r * ell_r_pu)
    if sampled_caps:
        phi1 = np.minimum(1.0, lam1 / rz.s_pu)
        phi2 = np.minimum(1.0, lam2 / rz.r_pu)
    else:
        phi1 = np.minimum(1.0, lam1)
        phi2 = np.minimum(1.0, lam2)
    return LinkBudget(
        scenario=sc, uav=uav,
        broadcast_terms=broadcast_terms, relay_terms=relay_terms,
        I_r=np.asarray(I_r, dtype=float), I_n=np.asarray(I_n, dtype=float),
        gain=gain, phi1=phi1, phi2=phi2, lam1=lam1, lam2=lam2,
        realizations=rz,
    )


def interference_noise_terms(
    scenario: ScenarioConfig,
    c: Position,
    cluster: Sequence[int],
    realizations: Realizations | None = None,
    channel: int = 0,
) -> ClusterLinkState:
    """Cluster link state of ``cluster`` (secondary-user ids) on ``channel``
    with the UAV at ``c``."""
    return link_budget(scenario, c, realizations).cluster_state(channel, list(cluster))
