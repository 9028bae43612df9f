"""Scenario data model, JSON ingestion, unit conversions and RNG streams.

A scenario describes one cooperative-cognitive NOMA deployment: the primary
base station (PBS) with its primary users, the secondary base station (SBS),
the relaying UAV and the secondary users in a hot-spot.  Powers are stored
in dBm so that a config survives a JSON round trip bit-for-bit; watt values
are exposed as properties.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

METRICS = ("rate", "throughput", "coverage")
CHANNEL_MODES = ("deterministic", "stochastic")

# Stream ids of the seed split.  Never renumber: results depend on them.
STREAM_IDS = {
    "users": 1,
    "fading": 2,
    "monte_carlo": 3,
    "annealing": 4,
    "oracle": 5,
}


class ScenarioError(ValueError):
    """Raised when a scenario file cannot be parsed or fails validation."""


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_w: float) -> float:
    return 10.0 * math.log10(p_w) + 30.0


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


@dataclass(frozen=True)
class Position:
    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ScenarioError(f"non-finite coordinate in {self!r}")
        if self.z < 0:
            raise ScenarioError(f"negative height z={self.z}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def to_list(self) -> list[float]:
        return [self.x, self.y, self.z]

    @classmethod
    def from_seq(cls, seq: Sequence[float]) -> "Position":
        if len(seq) == 2:
            return cls(float(seq[0]), float(seq[1]), 0.0)
        if len(seq) != 3:
            raise ScenarioError(f"position needs 2 or 3 coordinates, got {seq!r}")
        return cls(float(seq[0]), float(seq[1]), float(seq[2]))


@dataclass(frozen=True)
class Hotspot:
    center: Position
    radius: float

    def contains(self, p: Position, slack: float = 1e-9) -> bool:
        return math.hypot(p.x - self.center.x, p.y - self.center.y) <= self.radius + slack


@dataclass(frozen=True)
class NetworkNodes:
    pbs: Position
    sbs: Position
    uav: Position
    primary_users: tuple[Position, ...]
    secondary_users: tuple[Position, ...]


@dataclass(frozen=True)
class PowerBudget:
    """Total transmit powers in dBm; each of the K channels gets 1/K of them."""

    p_pbs_dbm: float = 46.0
    p_sbs_dbm: float = 46.0
    p_uav_dbm: float = 30.0

    @property
    def p_pbs_total(self) -> float:
        return dbm_to_watts(self.p_pbs_dbm)

    @property
    def p_sbs_total(self) -> float:
        return dbm_to_watts(self.p_sbs_dbm)

    @property
    def p_uav_total(self) -> float:
        return dbm_to_watts(self.p_uav_dbm)


@dataclass(frozen=True)
class FadingShapes:
    """Integer Nakagami shapes of the serving (x), PU-interference (y) and
    PBS-interference (z) link classes."""

    x: int = 2
    y: int = 2
    z: int = 2


@dataclass(frozen=True)
class ImpairmentConfig:
    hi_level_phi: float = 0.0
    csi_theta: float = 0.0
    csi_mu: float = 0.0
    fading_m: FadingShapes = field(default_factory=FadingShapes)

    @property
    def hi_var(self) -> float:
        """Distortion power per unit signal power (phi squared)."""
        return self.hi_level_phi ** 2


# Default geometry: SBS at x = 0, hot-spot of radius 100 m centred 400 m
# away, PBS 30 km south of the hot-spot with its PU 500 m towards it.
DEFAULT_SBS = Position(0.0, 400.0, 20.0)
DEFAULT_PBS = Position(400.0, -30000.0, 20.0)
DEFAULT_UAV = Position(400.0, 400.0, 250.0)
DEFAULT_HOTSPOT = Hotspot(Position(400.0, 400.0, 0.0), 100.0)
DEFAULT_PUS = (Position(400.0, -29500.0, 0.0),)
DEFAULT_SUS = (
    Position(500.0, 400.0, 0.0),
    Position(450.0, 400.0, 0.0),
    Position(350.0, 400.0, 0.0),
    Position(300.0, 400.0, 0.0),
)


@dataclass(frozen=True)
class ScenarioConfig:
    nodes: NetworkNodes
    budget: PowerBudget = field(default_factory=PowerBudget)
    bandwidth_w: float = 180e3
    carrier_fc: float = 1.8e9
    itc_dbm: float = 0.0
    los_params_backhaul: tuple[float, float] = (7.0, 0.2)
    los_params_access: tuple[float, float] = (13.0, 0.22)
    attenuation_db: tuple[float, float] = (1.6, 20.0)
    impairments: ImpairmentConfig = field(default_factory=ImpairmentConfig)
    noise_psd_dbm_hz: float = -174.0
    rate_threshold_rbar: float = 1.3e6
    hotspot: Hotspot = DEFAULT_HOTSPOT
    region_radius: float = 500.0
    max_cluster_size: int | None = None
    metric: str = "rate"
    channel_mode: str = "deterministic"
    rng_seed: int = 0

    def __post_init__(self):
        validate(self)

    # -- derived quantities -------------------------------------------------
    @property
    def k_channels(self) -> int:
        return len(self.nodes.primary_users)

    @property
    def n_users(self) -> int:
        return len(self.nodes.secondary_users)

    @property
    def cluster_cap(self) -> int:
        if self.max_cluster_size is not None:
            return self.max_cluster_size
        return -(-self.n_users // self.k_channels)

    @property
    def noise_power_w(self) -> float:
        return dbm_to_watts(self.noise_psd_dbm_hz + 10.0 * math.log10(self.bandwidth_w))

    @property
    def itc_w(self) -> float:
        return dbm_to_watts(self.itc_dbm)

    def per_channel_power(self, node: str) -> float:
        total = {
            "pbs": self.budget.p_pbs_total,
            "sbs": self.budget.p_sbs_total,
            "uav": self.budget.p_uav_total,
        }[node]
        return total / self.k_channels

    # -- convenience constructors ------------------------------------------
    def with_uav(self, uav: Position) -> "ScenarioConfig":
        return replace(self, nodes=replace(self.nodes, uav=uav))

    def with_users(self, users: Sequence[Position]) -> "ScenarioConfig":
        return replace(self, nodes=replace(self.nodes, secondary_users=tuple(users)))

    def with_channels(self, k: int, radius: float | None = None) -> "ScenarioConfig":
        """Copy with ``k`` primary users spread on a circle around the PBS.

        The circle radius defaults to the distance from the PBS to the first
        configured PU, so the primary network keeps its scale.
        """
        if k < 1:
            raise ScenarioError("k must be >= 1")
        pbs = self.nodes.pbs
        if radius is None:
            pu = self.nodes.primary_users[0]
            radius = math.hypot(pu.x - pbs.x, pu.y - pbs.y)
            phase = math.atan2(pu.y - pbs.y, pu.x - pbs.x)
        else:
            phase = 0.0
        angles = phase + 2.0 * math.pi * np.arange(k) / k
        pus = tuple(
            Position(pbs.x + radius * math.cos(a), pbs.y + radius * math.sin(a), 0.0)
            for a in angles
        )
        return replace(self, nodes=replace(self.nodes, primary_users=pus), max_cluster_size=None)

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        imp = self.impairments
        return {
            "rng_seed": self.rng_seed,
            "bandwidth_hz": self.bandwidth_w,
            "carrier_hz": self.carrier_fc,
            "power_dbm": {
                "pbs": self.budget.p_pbs_dbm,
                "sbs": self.budget.p_sbs_dbm,
                "uav": self.budget.p_uav_dbm,
            },
            "itc_dbm": self.itc_dbm,
            "los_backhaul": list(self.los_params_backhaul),
            "los_access": list(self.los_params_access),
            "eta_db": list(self.attenuation_db),
            "noise_psd_dbm_hz": self.noise_psd_dbm_hz,
            "rate_threshold_bps": self.rate_threshold_rbar,
            "impairments": {
                "hi_level": imp.hi_level_phi,
                "csi_theta": imp.csi_theta,
                "csi_mu": imp.csi_mu,
                "fading_m": asdict(imp.fading_m),
            },
            "nodes": {
                "pbs": self.nodes.pbs.to_list(),
                "sbs": self.nodes.sbs.to_list(),
                "uav": self.nodes.uav.to_list(),
                "primary_users": [p.to_list() for p in self.nodes.primary_users],
                "secondary_users": [p.to_list() for p in self.nodes.secondary_users],
            },
            "hotspot": {"center": self.hotspot.center.to_list(), "radius": self.hotspot.radius},
            "region_radius": self.region_radius,
            "max_cluster_size": self.max_cluster_size,
            "metric": self.metric,
            "channel_mode": self.channel_mode,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def validate(cfg: ScenarioConfig) -> None:
    """Check every scenario invariant; raise ScenarioError naming the first
    violation."""

    def fail(msg):
        raise ScenarioError(msg)

    nodes = cfg.nodes
    if not nodes.primary_users:
        fail("primary_users must be non-empty")
    if not nodes.secondary_users:
        fail("secondary_users must be non-empty")
    if cfg.hotspot.radius <= 0:
        fail(f"hotspot radius must be > 0, got {cfg.hotspot.radius}")
    if cfg.bandwidth_w <= 0:
        fail(f"bandwidth must be > 0, got {cfg.bandwidth_w}")
    if cfg.carrier_fc <= 0:
        fail(f"carrier frequency must be > 0, got {cfg.carrier_fc}")
    if cfg.region_radius <= 0:
        fail(f"region radius must be > 0, got {cfg.region_radius}")
    if cfg.rate_threshold_rbar < 0:
        fail("rate threshold must be >= 0")
    for name in ("los_params_backhaul", "los_params_access"):
        a, b = getattr(cfg, name)
        if a <= 0 or b <= 0:
            fail(f"{name} must be positive, got {(a, b)}")
    imp = cfg.impairments
    if imp.csi_theta < 0:
        fail(f"csi_theta must be >= 0, got {imp.csi_theta}")
    if imp.csi_mu < 0:
        fail(f"csi_mu must be >= 0, got {imp.csi_mu}")
    if imp.hi_level_phi < 0:
        fail(f"hi_level must be >= 0, got {imp.hi_level_phi}")
    for shape_name in ("x", "y", "z"):
        m = getattr(imp.fading_m, shape_name)
        if not isinstance(m, (int, np.integer)) or isinstance(m, bool) or m < 1:
            fail(f"fading shape {shape_name} must be a positive integer, got {m!r}")
    for s in nodes.secondary_users:
        if not cfg.hotspot.contains(s):
            fail(f"secondary user {s.to_list()} lies outside the hot-spot disc")
    if cfg.max_cluster_size is not None:
        if cfg.max_cluster_size < 1:
            fail("max_cluster_size must be >= 1")
        if cfg.max_cluster_size * cfg.k_channels < cfg.n_users:
            fail("max_cluster_size * K must cover every secondary user")
    if cfg.metric not in METRICS:
        fail(f"metric must be one of {METRICS}, got {cfg.metric!r}")
    if cfg.channel_mode not in CHANNEL_MODES:
        fail(f"channel_mode must be one of {CHANNEL_MODES}, got {cfg.channel_mode!r}")
    if not (0 <= int(cfg.rng_seed) < 2 ** 64):
        fail("rng_seed must be a 64-bit unsigned integer")


def _pair(value, name) -> tuple[float, float]:
    if len(value) != 2:
        raise ScenarioError(f"{name} needs two values")
    return float(value[0]), float(value[1])


def scenario_from_dict(d: dict[str, Any]) -> ScenarioConfig:
    """Build a validated config from a parsed JSON mapping; missing fields
    take the default-table values."""
    if not isinstance(d, dict):
        raise ScenarioError("scenario document must be a JSON object")
    try:
        nd = d.get("nodes", {})
        nodes = NetworkNodes(
            pbs=Position.from_seq(nd.get("pbs", DEFAULT_PBS.to_list())),
            sbs=Position.from_seq(nd.get("sbs", DEFAULT_SBS.to_list())),
            uav=Position.from_seq(nd.get("uav", DEFAULT_UAV.to_list())),
            primary_users=tuple(
                Position.from_seq(p) for p in nd.get("primary_users", [p.to_list() for p in DEFAULT_PUS])
            ),
            secondary_users=tuple(
                Position.from_seq(p) for p in nd.get("secondary_users", [p.to_list() for p in DEFAULT_SUS])
            ),
        )
        pw = d.get("power_dbm", {})
        budget = PowerBudget(
            p_pbs_dbm=float(pw.get("pbs", 46.0)),
            p_sbs_dbm=float(pw.get("sbs", 46.0)),
            p_uav_dbm=float(pw.get("uav", 30.0)),
        )
        im = d.get("impairments", {})
        fm = im.get("fading_m", {})
        if isinstance(fm, int):
            fm = {"x": fm, "y": fm, "z": fm}
        impairments = ImpairmentConfig(
            hi_level_phi=float(im.get("hi_level", 0.0)),
            csi_theta=float(im.get("csi_theta", 0.0)),
            csi_mu=float(im.get("csi_mu", 0.0)),
            fading_m=FadingShapes(**{k: fm.get(k, 2) for k in ("x", "y", "z")}),
        )
        hs = d.get("hotspot", {})
        hotspot = Hotspot(
            Position.from_seq(hs.get("center", DEFAULT_HOTSPOT.center.to_list())),
            float(hs.get("radius", DEFAULT_HOTSPOT.radius)),
        )
        mcs = d.get("max_cluster_size")
        return ScenarioConfig(
            nodes=nodes,
            budget=budget,
            bandwidth_w=float(d.get("bandwidth_hz", 180e3)),
            carrier_fc=float(d.get("carrier_hz", 1.8e9)),
            itc_dbm=float(d.get("itc_dbm", 0.0)),
            los_params_backhaul=_pair(d.get("los_backhaul", (7.0, 0.2)), "los_backhaul"),
            los_params_access=_pair(d.get("los_access", (13.0, 0.22)), "los_access"),
            attenuation_db=_pair(d.get("eta_db", (1.6, 20.0)), "eta_db"),
            impairments=impairments,
            noise_psd_dbm_hz=float(d.get("noise_psd_dbm_hz", -174.0)),
            rate_threshold_rbar=float(d.get("rate_threshold_bps", 1.3e6)),
            hotspot=hotspot,
            region_radius=float(d.get("region_radius", 500.0)),
            max_cluster_size=None if mcs is None else int(mcs),
            metric=str(d.get("metric", "rate")),
            channel_mode=str(d.get("channel_mode", "deterministic")),
            rng_seed=int(d["rng_seed"]),
        )
    except KeyError as exc:
        raise ScenarioError(f"missing required field {exc}") from None
    except (TypeError, AttributeError) as exc:
        raise ScenarioError(f"malformed scenario: {exc}") from None


def load_scenario(path: str | os.PathLike, env: dict | None = None) -> ScenarioConfig:
    """Read a JSON scenario file.

    ``rng_seed`` is the only mandatory field.  The ``CCR_SEED`` environment
    variable, when set, overrides the seed in the file.
    """
    env = os.environ if env is None else env
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"cannot parse {path}: {exc}") from None
    if isinstance(doc, dict) and env.get("CCR_SEED"):
        doc = dict(doc, rng_seed=int(env["CCR_SEED"]))
    return scenario_from_dict(doc)


def save_scenario(cfg: ScenarioConfig, path: str | os.PathLike) -> None:
    Path(path).write_text(cfg.to_json() + "\n")


def default_scenario(seed: int = 0) -> ScenarioConfig:
    return scenario_from_dict({"rng_seed": seed})


def reference_scenario(name: str) -> ScenarioConfig:
    """Load one of the scenarios shipped in ``ccrnoma/data``."""
    here = Path(__file__).parent / "data"
    path = here / f"{name}.json"
    if not path.exists():
        names = sorted(p.stem for p in here.glob("*.json"))
        raise ScenarioError(f"unknown reference scenario {name!r}; have {names}")
    return load_scenario(path, env={})


def rng_stream(seed: int, name: str, *index: int) -> np.random.Generator:
    """Independent generator for one consumer of the global seed.

    The stream is keyed by ``(seed, STREAM_IDS[name], *index)`` through
    numpy's SeedSequence and drives a PCG64 bit generator, so results are
    identical across platforms and do not depend on the order in which
    consumers draw.
    """
    key = [int(seed) & (2 ** 64 - 1), STREAM_IDS[name], *(int(i) for i in index)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


def generate_hotspot_users(hotspot: Hotspot, n: int, rng: np.random.Generator) -> list[Position]:
    """Uniform users over the hot-spot disc at ground level.

    Radius by inverse CDF (r = R*sqrt(u)), angle uniform; one (u, angle)
    pair drawn per user in a single vectorized call.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    u = rng.random((n, 2))
    r = hotspot.radius * np.sqrt(u[:, 0])
    ang = 2.0 * np.pi * u[:, 1]
    cx, cy = hotspot.center.x, hotspot.center.y
    return [Position(float(cx + ri * np.cos(a)), float(cy + ri * np.sin(a)), 0.0) for ri, a in zip(r, ang)]
