"""Air-to-ground channel model: LoS probability, path loss, attenuation,
Nakagami-m fading and imperfect-CSI realizations.

Elevation angles enter the LoS sigmoid in degrees.  The sigmoid uses the
horizontal ground distance; free-space path loss uses the 3D slant distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import SPEED_OF_LIGHT, ImpairmentConfig, Position

CSI_SCALE_FLOOR = 1e-6

# 20*log10(4*pi/c)
_FSPL_CONST_DB = 20.0 * math.log10(4.0 * math.pi / SPEED_OF_LIGHT)


@dataclass(frozen=True)
class LinkGeometry:
    tx: Position
    rx: Position
    horizontal_distance: float
    slant_distance: float
    elevation_angle: float

    @classmethod
    def between(cls, tx: Position, rx: Position, airborne_rx: bool = False) -> "LinkGeometry":
        """Geometry of the link ``tx -> rx``.

        For links into the UAV (``airborne_rx``) the angle is the UAV
        elevation seen from the transmitter, ``atan((z_rx - z_tx)/d)``, and is
        negative when the UAV flies below the base station.  For links into
        ground nodes it is the transmitter elevation seen from the ground,
        ``atan((z_tx - z_rx)/d)``.
        """
        d_h = math.hypot(rx.x - tx.x, rx.y - tx.y)
        dz = rx.z - tx.z if airborne_rx else tx.z - rx.z
        slant = math.hypot(d_h, rx.z - tx.z)
        elev = math.degrees(math.atan2(dz, d_h))
        return cls(tx, rx, d_h, slant, elev)


def los_probability(elevation_deg, params: tuple[float, float]):
    """Sigmoid LoS probability ``1 / (1 + a exp(-b (theta - a)))``.

    ``elevation_deg`` may be a LinkGeometry, a scalar or an array of angles
    in degrees.
    """
    a, b = params
    theta = elevation_deg.elevation_angle if isinstance(elevation_deg, LinkGeometry) else elevation_deg
    return 1.0 / (1.0 + a * np.exp(-b * (np.asarray(theta, dtype=float) - a)))


def fspl_db(slant_distance, fc: float):
    d = np.asarray(slant_distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("free-space path loss needs a positive distance")
    if fc <= 0:
        raise ValueError("carrier frequency must be positive")
    return 20.0 * np.log10(d) + 20.0 * math.log10(fc) + _FSPL_CONST_DB


def mean_path_loss_db(geometry: LinkGeometry, los_params, eta_db, fc, p_los=None):
    """LoS/NLoS-averaged path loss in dB.

    ``p_los`` overrides the sigmoid (used to pin the LoS probability)."""
    if p_los is None:
        p_los = los_probability(geometry, los_params)
    fspl = fspl_db(geometry.slant_distance, fc)
    eta_los, eta_nlos = eta_db
    return p_los * (fspl + eta_los) + (1.0 - p_los) * (fspl + eta_nlos)


def mean_attenuation(geometry: LinkGeometry, los_params, eta_db, fc, p_los=None):
    """Linear attenuation as the LoS-probability weighted geometric mean of
    the LoS and NLoS losses, ``prod_l (eta_l * FSPL)^(-p_l)``."""
    if p_los is None:
        p_los = los_probability(geometry, los_params)
    fspl_lin = 10.0 ** (fspl_db(geometry.slant_distance, fc) / 10.0)
    eta_los, eta_nlos = 10.0 ** (np.asarray(eta_db, dtype=float) / 10.0)
    return (eta_los * fspl_lin) ** (-p_los) * (eta_nlos * fspl_lin) ** (-(1.0 - p_los))


def attenuation_arrays(tx: np.ndarray, rx: np.ndarray, los_params, eta_db, fc, airborne_rx=False):
    """Vectorized ``mean_attenuation`` over coordinate arrays of shape (..., 3)."""
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    d_h = np.hypot(rx[..., 0] - tx[..., 0], rx[..., 1] - tx[..., 1])
    dz = rx[..., 2] - tx[..., 2]
    slant = np.hypot(d_h, dz)
    elev = np.degrees(np.arctan2(dz if airborne_rx else -dz, d_h))
    p_los = los_probability(elev, los_params)
    pl_db = fspl_db(slant, fc) + p_los * eta_db[0] + (1.0 - p_los) * eta_db[1]
    return 10.0 ** (-pl_db / 10.0)


def sample_nakagami_power(m: int, rng: np.random.Generator, size=None):
    """Unit-mean Nakagami-m power: Gamma(shape m, rate m)."""
    if m < 1:
        raise ValueError("fading shape m must be >= 1")
    return rng.gamma(shape=m, scale=1.0 / m, size=size)


def csi_error_variance(theta: float, mu: float, tx_snr_linear: float) -> float:
    if tx_snr_linear <= 0:
        raise ValueError("transmit SNR must be positive")
    return theta * tx_snr_linear ** (-mu)


@dataclass(frozen=True)
class ChannelRealization:
    ell: float
    h_true_power: float
    h_est: complex
    err_var: float
    est_power: float


LINK_CLASSES = ("x", "y", "z")


def sample_channel(
    geometry: LinkGeometry,
    link_class: str,
    impairments: ImpairmentConfig,
    tx_snr: float,
    rng: np.random.Generator,
    los_params=(7.0, 0.2),
    eta_db=(1.6, 20.0),
    fc: float = 1.8e9,
) -> ChannelRealization:
    """Draw one estimated/true channel pair ``h = h_est + e``.

    ``|h_est|^2`` is a Nakagami power scaled by ``max(1 - zeta, 1e-6)`` and
    ``e ~ CN(0, zeta)``, which keeps ``E|h|^2 = 1``.  ``link_class`` picks
    the fading shape (x serving, y towards the PU, z from the PBS).
    """
    if link_class not in LINK_CLASSES:
        raise ValueError(f"link_class must be one of {LINK_CLASSES}")
    zeta = csi_error_variance(impairments.csi_theta, impairments.csi_mu, tx_snr)
    if zeta >= 1.0:
        raise ValueError(f"CSI error variance {zeta} >= 1 exceeds the channel power")
    m = getattr(impairments.fading_m, link_class)
    scale = max(1.0 - zeta, CSI_SCALE_FLOOR)
    est_power = scale * sample_nakagami_power(m, rng)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    h_est = complex(math.sqrt(est_power) * np.cos(phase), math.sqrt(est_power) * np.sin(phase))
    e = complex(*(rng.standard_normal(2) * math.sqrt(zeta / 2.0)))
    h = h_est + e
    ell = float(mean_attenuation(geometry, los_params, eta_db, fc))
    return ChannelRealization(
        ell=ell,
        h_true_power=abs(h) ** 2,
        h_est=h_est,
        err_var=zeta,
        est_power=float(est_power),
    )
