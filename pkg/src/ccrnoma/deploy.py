"""3D UAV placement by simulated annealing over the clustering fitness,
plus exhaustive grid sweeps used to check it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assign import cluster_and_assign
from .scenario import Position, ScenarioConfig

WARMUP_SAMPLES = 20
DEFAULT_KAPPA = 0.95
DEFAULT_STEP_FRACTION = 0.05


@dataclass(frozen=True)
class SearchSpace:
    """Axis-aligned box ``[(x0, x1), (y0, y1), (h0, h1)]``.

    An axis with ``lo == hi`` is held fixed, which turns the box into the
    2-D (d, H) slice along the SBS to hot-spot axis.
    """

    bounds: tuple[tuple[float, float], ...]
    step_scale: tuple[float, ...] | None = None
    iterations: int = 500
    t0: float | None = None
    kappa: float = DEFAULT_KAPPA

    def __post_init__(self):
        if len(self.bounds) != 3:
            raise ValueError("bounds need x, y and height intervals")
        spans = [hi - lo for lo, hi in self.bounds]
        if any(s < 0 for s in spans) or not any(s > 0 for s in spans):
            raise ValueError("bounds must satisfy lo <= hi with at least one open axis")
        if self.bounds[2][0] < 0:
            raise ValueError("height must be nonnegative")
        if not 0.0 < self.kappa < 1.0:
            raise ValueError("cooling factor kappa must lie in (0, 1)")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.t0 is not None and self.t0 < 0:
            raise ValueError("initial temperature must be nonnegative")

    @property
    def lo(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds], dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds], dtype=float)

    @property
    def steps(self) -> np.ndarray:
        if self.step_scale is not None:
            return np.asarray(self.step_scale, dtype=float)
        return DEFAULT_STEP_FRACTION * (self.hi - self.lo)

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.lo + rng.random(3) * (self.hi - self.lo)


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    c: Position
    fitness: float
    accepted: bool


@dataclass(frozen=True)
class DeploymentResult:
    best_c: Position
    best_fitness: float
    trace: tuple[TraceEntry, ...] = field(default=())
    t0: float = 0.0


def fitness(c: Position, scenario: ScenarioConfig, metric: str | None = None) -> float:
    """Worst cluster metric after clustering with the UAV at ``c``."""
    return cluster_and_assign(c, scenario, metric).min_metric


def reflect(p: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Fold coordinates back into [lo, hi] by mirror reflection."""
    span = hi - lo
    out = np.array(p, dtype=float)
    open_ = span > 0
    u = np.mod(out[open_] - lo[open_], 2.0 * span[open_])
    out[open_] = lo[open_] + np.where(u > span[open_], 2.0 * span[open_] - u, u)
    out[~open_] = lo[~open_]
    return out


def neighbor(p: np.ndarray, space: SearchSpace, rng: np.random.Generator) -> np.ndarray:
    step = space.steps * rng.uniform(-1.0, 1.0, size=3)
    return reflect(np.asarray(p, dtype=float) + step, space.lo, space.hi)


def _as_position(p) -> Position:
    return Position(float(p[0]), float(p[1]), float(p[2]))


def simulated_annealing(
    scenario: ScenarioConfig,
    space: SearchSpace,
    rng: np.random.Generator,
    fitness_fn: Callable[[Position], float] | None = None,
) -> DeploymentResult:
    """Maximize the fitness over ``space``.

    A 20-point random warm-up sets the initial temperature (the standard
    deviation of the warm-up fitness, unless ``space.t0`` is given) and the
    chain starts from the best warm-up point.  Temperature decays
    geometrically with ``space.kappa``.  Entry 0 of the trace is the start.
    """
    f = fitness_fn or (lambda c: fitness(c, scenario))
    warm = [space.sample(rng) for _ in range(WARMUP_SAMPLES)]
    warm_f = [f(_as_position(p)) for p in warm]
    t0 = float(np.std(warm_f)) if space.t0 is None else float(space.t0)
    i0 = int(np.argmax(warm_f))
    cur, cur_f = warm[i0], warm_f[i0]
    best, best_f = cur, cur_f
    trace = [TraceEntry(0, _as_position(cur), cur_f, True)]
    for t in range(1, space.iterations + 1):
        cand = neighbor(cur, space, rng)
        cand_f = f(_as_position(cand))
        temp = t0 * space.kappa ** t
        if cand_f >= cur_f:
            accept = True
        elif temp > 0:
            accept = math.exp((cand_f - cur_f) / temp) > rng.random()
        else:
            accept = False
        if accept:
            cur, cur_f = cand, cand_f
            if cur_f > best_f:
                best, best_f = cur, cur_f
        trace.append(TraceEntry(t, _as_position(cand), cand_f, accept))
    return DeploymentResult(_as_position(best), best_f, tuple(trace), t0)


def axis_position(scenario: ScenarioConfig, d: float, h: float) -> Position:
    """UAV at horizontal distance ``d`` from the SBS along the SBS to
    hot-spot axis, altitude ``h``."""
    sbs = scenario.nodes.sbs
    hc = scenario.hotspot.center
    v = np.array([hc.x - sbs.x, hc.y - sbs.y])
    norm = np.hypot(*v)
    u = v / norm if norm > 0 else np.array([1.0, 0.0])
    return Position(float(sbs.x + d * u[0]), float(sbs.y + d * u[1]), float(h))


def axis_space(scenario: ScenarioConfig, d_range, h_range, **kwargs) -> SearchSpace:
    """Search box of the (d, H) slice; only valid when the SBS to hot-spot
    axis is parallel to x."""
    sbs, hc = scenario.nodes.sbs, scenario.hotspot.center
    if sbs.y != hc.y:
        raise ValueError("the (d, H) slice needs the SBS and hot-spot on a line of constant y")
    sign = 1.0 if hc.x >= sbs.x else -1.0
    xs = sorted((sbs.x + sign * d_range[0], sbs.x + sign * d_range[1]))
    return SearchSpace(((xs[0], xs[1]), (sbs.y, sbs.y), tuple(h_range)), **kwargs)


def grid_sweep(
    scenario: ScenarioConfig,
    d_values,
    h_values,
    metric: str | None = None,
) -> np.ndarray:
    """Fitness on the (d, H) grid, shape (len(d_values), len(h_values)).

    A grid point that coincides with the SBS has no defined backhaul link and
    is reported as NaN.
    """
    sbs = scenario.nodes.sbs
    out = np.empty((len(d_values), len(h_values)))
    for i, d in enumerate(d_values):
        for j, h in enumerate(h_values):
            c = axis_position(scenario, d, h)
            if (c.x, c.y, c.z) == (sbs.x, sbs.y, sbs.z):
                out[i, j] = np.nan
                continue
            out[i, j] = fitness(c, scenario, metric)
    return out
