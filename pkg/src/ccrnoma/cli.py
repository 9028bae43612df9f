"""Command-line front end.

Every command writes its artifacts into ``--out`` (default: current
directory).  CSV files start with a single comment line naming the artifact
and its schema version, e.g. ``# ccrnoma sweep v1``; numbers use 12
significant digits.  Timings go to stdout only, so artifacts are
byte-identical across runs with the same scenario and seed.

Exit codes: 0 success, 1 a validation check failed, 2 usage or scenario
error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .assign import cluster_and_assign, exhaustive_assignment_oracle, lba_solve
from .coverage import coverage_allocation, cluster_coverage, monte_carlo_coverage
from .deploy import SearchSpace, axis_position, axis_space, simulated_annealing
from .link import link_budget, sample_realizations
from .ra import PowerCaps, allocate_cluster, grid_oracle_allocate
from .scenario import (
    Position,
    ScenarioConfig,
    ScenarioError,
    generate_hotspot_users,
    load_scenario,
    reference_scenario,
    rng_stream,
)

SCHEMA_VERSION = 1
SWEEP_VARIABLES = ("uav_d", "uav_h", "tx_power_dbm", "rbar", "cluster_size", "n_users")
SWEEP_MODES = ("deterministic", "monte_carlo")


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"


def write_csv(path: Path, kind: str, header: Sequence[str], rows, meta: dict | None = None) -> None:
    buf = io.StringIO()
    tags = "".join(f" {k}={v}" for k, v in (meta or {}).items())
    buf.write(f"# ccrnoma {kind} v{SCHEMA_VERSION}{tags}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Scenario helpers
# ---------------------------------------------------------------------------


def resolve_scenario(arg: str | None, seed: int | None) -> ScenarioConfig:
    """A path to a JSON file or the name of a shipped reference scenario."""
    if arg is None:
        sc = reference_scenario("four_users")
    elif Path(arg).exists():
        sc = load_scenario(arg)
    else:
        sc = reference_scenario(arg)
    return sc if seed is None else sc.replace(rng_seed=seed)


def with_hotspot_users(sc: ScenarioConfig, n: int) -> ScenarioConfig:
    rng = rng_stream(sc.rng_seed, "users", n)
    return sc.with_users(generate_hotspot_users(sc.hotspot, n, rng))


def uav_axis_distance(sc: ScenarioConfig) -> float:
    s, u = sc.nodes.sbs, sc.nodes.uav
    return math.hypot(u.x - s.x, u.y - s.y)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    start: float
    stop: float
    steps: int
    mode: str = "deterministic"
    metric: str | None = None
    cluster_size: int = 4
    trials: int = 1000

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise UsageError(f"unknown sweep variable {self.variable!r}; choose from {SWEEP_VARIABLES}")
        if self.steps < 2:
            raise UsageError("a sweep needs at least 2 steps")
        if self.mode not in SWEEP_MODES:
            raise UsageError(f"mode must be one of {SWEEP_MODES}")
        if self.cluster_size < 1 or self.trials < 1:
            raise UsageError("cluster size and trial count must be positive")

    def values(self) -> np.ndarray:
        v = np.linspace(self.start, self.stop, self.steps)
        if self.variable in ("cluster_size", "n_users"):
            v = np.round(v)
        return v


def sweep_scenario(sc: ScenarioConfig, spec: SweepSpec, value: float) -> tuple[ScenarioConfig, str]:
    """Scenario for one sweep point and the metric to report there."""
    metric = spec.metric or sc.metric
    var = spec.variable
    if var == "uav_d":
        sc = sc.with_uav(axis_position(sc, value, sc.nodes.uav.z))
    elif var == "uav_h":
        sc = sc.with_uav(axis_position(sc, uav_axis_distance(sc), value))
    elif var == "tx_power_dbm":
        sc = sc.replace(budget=replace(sc.budget, p_sbs_dbm=value, p_uav_dbm=value))
    elif var == "rbar":
        sc = sc.replace(rate_threshold_rbar=value)
        metric = "coverage"
    elif var == "cluster_size":
        c = int(value)
        if c < 1:
            raise UsageError("cluster size must be >= 1")
        sc = sc.with_channels(math.ceil(sc.n_users / c))
    elif var == "n_users":
        n = int(value)
        if n < 1:
            raise UsageError("user count must be >= 1")
        sc = with_hotspot_users(sc, n).with_channels(max(1, math.ceil(n / spec.cluster_size)))
    return sc, metric


def _uav_on_sbs(sc: ScenarioConfig) -> bool:
    s, u = sc.nodes.sbs, sc.nodes.uav
    return (s.x, s.y, s.z) == (u.x, u.y, u.z)


def _mc_coverage_min(sc: ScenarioConfig, index: int, trials: int) -> float:
    res = cluster_and_assign(None, sc, "coverage")
    budget = link_budget(sc)
    worst = math.inf
    for k, members in enumerate(res.clusters):
        if not members:
            continue
        state = budget.cluster_state(k, members)
        alloc = coverage_allocation(state)
        for pos in range(state.size):
            rng = rng_stream(sc.rng_seed, "monte_carlo", index, k, pos)
            r = monte_carlo_coverage(state, alloc, sc.rate_threshold_rbar, trials, rng, n=pos)
            worst = min(worst, r.p_e2e)
    return worst


def _stochastic_rate(sc: ScenarioConfig, metric: str, index: int, trials: int) -> float:
    vals = []
    for t in range(trials):
        rz = sample_realizations(sc, rng_stream(sc.rng_seed, "fading", index, t))
        vals.append(cluster_and_assign(None, sc, metric, budget=link_budget(sc, realizations=rz)).min_metric)
    return float(np.mean(vals))


def sweep_point(args) -> list:
    sc, spec, index, value = args
    sc, metric = sweep_scenario(sc, spec, value)
    u = sc.nodes.uav
    if _uav_on_sbs(sc):
        val = math.nan
    elif spec.mode == "deterministic":
        val = cluster_and_assign(None, sc, metric).min_metric
    elif metric == "coverage":
        val = _mc_coverage_min(sc, index, spec.trials)
    else:
        val = _stochastic_rate(sc, metric, index, spec.trials)
    return [index, value, metric, val, u.x, u.y, u.z, sc.k_channels, sc.n_users]


SWEEP_HEADER = ("index", "value", "metric", "min_metric", "uav_x", "uav_y", "uav_z", "k", "n")


def run_sweep(sc: ScenarioConfig, spec: SweepSpec, workers: int = 1) -> list[list]:
    """Evaluate every sweep point; rows come back in sweep order."""
    jobs = [(sc, spec, i, float(v)) for i, v in enumerate(spec.values())]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(sweep_point, jobs))
    return [sweep_point(j) for j in jobs]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _members(arg: str | None, sc: ScenarioConfig) -> list[int]:
    if arg is None:
        return list(range(sc.n_users))
    try:
        ids = [int(x) for x in arg.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"--users expects comma-separated ids, got {arg!r}") from exc
    if not ids or min(ids) < 0 or max(ids) >= sc.n_users or len(set(ids)) != len(ids):
        raise UsageError(f"--users must list distinct ids in [0, {sc.n_users})")
    return ids


def _uav_override(sc: ScenarioConfig, uav) -> ScenarioConfig:
    return sc if uav is None else sc.with_uav(Position(*uav))


def cmd_ra(a, sc: ScenarioConfig, out: Path) -> int:
    sc = _uav_override(sc, a.uav)
    if not 0 <= a.channel < sc.k_channels:
        raise UsageError(f"--channel must lie in [0, {sc.k_channels})")
    budget = link_budget(sc)
    state = budget.cluster_state(a.channel, _members(a.users, sc))
    res = allocate_cluster(state, PowerCaps(float(budget.phi1[a.channel]), float(budget.phi2[a.channel])))
    rows = [
        [pos, user, res.alpha[pos], res.beta[pos], res.gamma_star, res.maxmin_rate]
        for pos, user in enumerate(state.user_order)
    ]
    write_csv(out / "ra.csv", "ra", ("decoding_pos", "user", "alpha", "beta", "gamma_star", "rate_bps"), rows)
    print(f"gamma*={fmt(res.gamma_star)} rate={fmt(res.maxmin_rate)} bit/s "
          f"(broadcast {fmt(res.gamma1)}, relay {fmt(res.gamma2)})")
    return 0


def cmd_coverage(a, sc: ScenarioConfig, out: Path) -> int:
    sc = _uav_override(sc, a.uav)
    if not 0 <= a.channel < sc.k_channels:
        raise UsageError(f"--channel must lie in [0, {sc.k_channels})")
    budget = link_budget(sc)
    state = budget.cluster_state(a.channel, _members(a.users, sc))
    alloc = coverage_allocation(state)
    lo, hi, steps = a.range
    steps = int(steps)
    if steps < 2:
        raise UsageError("a sweep needs at least 2 steps")
    rows = []
    for i, rbar in enumerate(np.linspace(lo, hi, steps)):
        for pos, r in enumerate(cluster_coverage(state, alloc, rbar)):
            mc, se = math.nan, math.nan
            if a.trials > 0:
                rng = rng_stream(sc.rng_seed, "monte_carlo", i, pos)
                m = monte_carlo_coverage(state, alloc, rbar, a.trials, rng, n=pos)
                mc, se = m.p_e2e, m.mc_stderr
            rows.append([i, rbar, pos, state.user_order[pos], r.p_e2e, mc, se])
    write_csv(out / "coverage.csv", "coverage",
              ("index", "rbar", "decoding_pos", "user", "analytic", "monte_carlo", "stderr"), rows)
    print(f"{len(rows)} coverage points written")
    return 0


def cmd_cluster(a, sc: ScenarioConfig, out: Path) -> int:
    if a.n is not None:
        sc = with_hotspot_users(sc, a.n)
    if a.k is not None:
        sc = sc.with_channels(a.k)
    metric = a.metric or sc.metric
    budget = link_budget(sc)
    t = time.perf_counter()
    res = cluster_and_assign(None, sc, metric, budget=budget)
    elapsed = time.perf_counter() - t
    rows = [[k, " ".join(map(str, cl)), m] for k, (cl, m) in enumerate(zip(res.clusters, res.cluster_metrics))]
    write_csv(out / "clusters.csv", "clusters", ("channel", "members", "metric"), rows, {"metric": metric})
    print(f"K={sc.k_channels} N={sc.n_users} min {metric}={fmt(res.min_metric)} in {elapsed:.4f} s")
    if a.oracle:
        ora = exhaustive_assignment_oracle(None, sc, metric, budget=budget)
        match = math.isclose(ora.min_metric, res.min_metric, rel_tol=1e-9)
        print(f"oracle min {metric}={fmt(ora.min_metric)}: {'match' if match else 'MISMATCH'}")
        return 0 if match else 1
    return 0


def cmd_deploy(a, sc: ScenarioConfig, out: Path) -> int:
    kw = dict(iterations=a.iters, t0=a.t0, kappa=a.kappa)
    if a.slice:
        space = axis_space(sc, a.d_range, a.h_range, **kw)
    else:
        hc, r = sc.hotspot.center, sc.region_radius
        space = SearchSpace(((hc.x - r, hc.x + r), (hc.y - r, hc.y + r), tuple(a.h_range)), **kw)
    if a.step is not None:
        space = replace(space, step_scale=tuple(a.step * (h - l) for l, h in space.bounds))
    rng = rng_stream(sc.rng_seed, "annealing")
    t = time.perf_counter()
    res = simulated_annealing(sc, space, rng)
    elapsed = time.perf_counter() - t
    rows = [[e.iteration, e.c.x, e.c.y, e.c.z, e.fitness, int(e.accepted)] for e in res.trace]
    write_csv(out / "deploy_trace.csv", "deploy_trace", ("iteration", "x", "y", "z", "fitness", "accepted"), rows)
    write_json(out / "deploy.json", {
        "schema": f"ccrnoma deploy v{SCHEMA_VERSION}",
        "best_c": [float(fmt(v)) for v in (res.best_c.x, res.best_c.y, res.best_c.z)],
        "best_fitness": float(fmt(res.best_fitness)),
        "t0": float(fmt(res.t0)),
        "metric": sc.metric,
    })
    print(f"best {res.best_c} fitness={fmt(res.best_fitness)} in {elapsed:.1f} s")
    return 0


def cmd_sweep(a, sc: ScenarioConfig, out: Path) -> int:
    start, stop, steps = a.range
    if steps != int(steps):
        raise UsageError("steps must be an integer")
    spec = SweepSpec(a.variable, start, stop, int(steps), a.mode, a.metric, a.cluster_size, a.trials)
    t = time.perf_counter()
    rows = run_sweep(sc, spec, a.workers)
    elapsed = time.perf_counter() - t
    meta = {"variable": spec.variable, "mode": spec.mode}
    write_csv(out / f"sweep_{spec.variable}.csv", "sweep", SWEEP_HEADER, rows, meta)
    vals = np.array([r[3] for r in rows], dtype=float)
    if np.all(np.isnan(vals)):
        print(f"{len(rows)} points, all undefined, in {elapsed:.1f} s")
    else:
        i = int(np.nanargmax(vals))
        print(f"{len(rows)} points in {elapsed:.1f} s; max {fmt(vals[i])} at {spec.variable}={fmt(rows[i][1])}")
    return 0


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def _random_state(rng: np.random.Generator, c: int):
    from .link import ClusterLinkState, PhaseLinkState
    from .scenario import FadingShapes

    def phase(interf):
        return PhaseLinkState(
            est_gain_power=1.0, err_power_E=0.0, hi_var=0.0, pbs_interf_I=interf,
            norm_noise=0.0, pbs_gain_power=1.0, itc_ratio=math.inf, est_scale=1.0,
        )

    I_r = float(10 ** rng.uniform(-4, -1))
    I_n = np.sort(10 ** rng.uniform(-4, -1, size=c))[::-1]
    return ClusterLinkState(
        broadcast=phase(I_r), relay=tuple(phase(float(x)) for x in I_n),
        user_order=tuple(range(c)), agg_I_r=I_r, agg_I_n=tuple(float(x) for x in I_n),
        fading=FadingShapes(), bandwidth=180e3, channel=0,
    )


def check_ra(rng, count: int) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(count):
        c = int(rng.integers(1, 4))
        state = _random_state(rng, c)
        caps = PowerCaps(float(rng.uniform(0.2, 1.0)), float(rng.uniform(0.2, 1.0)))
        cf = allocate_cluster(state, caps)
        ora = grid_oracle_allocate(state, caps)
        worst = max(worst, abs(cf.gamma_star - ora.gamma_star) / cf.gamma_star)
    return worst <= 5e-3, f"max relative gap {worst:.2e} over {count} clusters"


def check_lba(rng, count: int, size: int) -> tuple[bool, str]:
    from itertools import permutations

    perms = np.array(list(permutations(range(size))))
    bad = 0
    for _ in range(count):
        m = rng.random((size, size))
        best = m[np.arange(size)[None, :], perms].min(axis=1).max()
        bad += lba_solve(m)[2] != best
    return bad == 0, f"{count - bad}/{count} matrices optimal"


def check_assignment(sc: ScenarioConfig, rng, count: int) -> tuple[bool, str]:
    """Single-round instances (K >= N) must match the oracle exactly; on
    multi-round ones the heuristic may only trail it, and the worst gap is
    reported."""
    single_bad = exceed = exact = 0
    worst = 0.0
    for i in range(count):
        k = int(rng.integers(1, 5))
        n = int(rng.integers(1, 8))
        inst = with_hotspot_users(sc.replace(rng_seed=sc.rng_seed + i), n).with_channels(k)
        budget = link_budget(inst)
        got = cluster_and_assign(None, inst, "rate", budget=budget).min_metric
        want = exhaustive_assignment_oracle(None, inst, "rate", budget=budget).min_metric
        same = math.isclose(got, want, rel_tol=1e-9)
        exact += same
        single_bad += n <= k and not same
        exceed += got > want * (1 + 1e-9)
        worst = max(worst, 1.0 - got / want)
    ok = single_bad == 0 and exceed == 0
    return ok, f"{exact}/{count} exact, single-round mismatches {single_bad}, worst gap {worst:.2e}"


def check_coverage(sc: ScenarioConfig, trials: int) -> tuple[bool, str]:
    budget = link_budget(sc)
    state = budget.cluster_state(0, list(range(min(2, sc.n_users))))
    alloc = coverage_allocation(state)
    worst = 0.0
    ok = True
    for i, scale in enumerate((0.5, 0.8, 1.0, 1.2)):
        rbar = scale * alloc.maxmin_rate
        an = cluster_coverage(state, alloc, rbar)[0].p_e2e
        mc = monte_carlo_coverage(state, alloc, rbar, trials, rng_stream(sc.rng_seed, "monte_carlo", i))
        gap = abs(an - mc.p_e2e)
        worst = max(worst, gap)
        ok &= gap <= max(0.005, 3 * mc.mc_stderr)
    return ok, f"max |analytic - MC| {worst:.2e} at {trials} trials"


def cmd_validate(a, sc: ScenarioConfig, out: Path) -> int:
    rng = rng_stream(sc.rng_seed, "oracle")
    quick = a.quick
    suites = [
        ("ra_closed_form_vs_grid", lambda: check_ra(rng, 10 if quick else 200)),
        ("lba_vs_permutations", lambda: check_lba(rng, 50 if quick else 500, 6 if quick else 8)),
        ("assignment_vs_exhaustive", lambda: check_assignment(sc, rng, 10 if quick else 50)),
        ("coverage_vs_monte_carlo", lambda: check_coverage(sc, 100_000 if quick else 1_000_000)),
    ]
    rows, failed = [], []
    for name, fn in suites:
        t = time.perf_counter()
        ok, detail = fn()
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail} ({time.perf_counter() - t:.1f} s)")
        rows.append([name, "pass" if ok else "fail", detail])
        if not ok:
            failed.append(name)
    write_csv(out / "validate.csv", "validate", ("suite", "status", "detail"), rows)
    if failed:
        print(f"validation failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON path or shipped name (default: four_users)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, help="override the scenario seed")

    p = argparse.ArgumentParser(prog="ccrnoma", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    ra = sub.add_parser("ra", parents=[common], help="allocate one cluster")
    ra.add_argument("--channel", type=int, default=0)
    ra.add_argument("--users", help="comma-separated user ids (default: all)")
    ra.add_argument("--uav", type=float, nargs=3, metavar=("X", "Y", "Z"))

    cov = sub.add_parser("coverage", parents=[common], help="coverage versus rate threshold")
    cov.add_argument("--channel", type=int, default=0)
    cov.add_argument("--users", help="comma-separated user ids (default: all)")
    cov.add_argument("--uav", type=float, nargs=3, metavar=("X", "Y", "Z"))
    cov.add_argument("--range", type=float, nargs=3, default=(0.2e6, 2e6, 10), metavar=("START", "STOP", "STEPS"))
    cov.add_argument("--trials", type=int, default=0, help="Monte Carlo trials per point (0 skips)")

    cl = sub.add_parser("cluster", parents=[common], help="cluster users and assign channels")
    cl.add_argument("--k", type=int, help="number of channels")
    cl.add_argument("--n", type=int, help="draw this many hot-spot users")
    cl.add_argument("--metric", choices=("rate", "throughput", "coverage"))
    cl.add_argument("--oracle", action="store_true", help="compare against exhaustive enumeration")

    dp = sub.add_parser("deploy", parents=[common], help="place the UAV by simulated annealing")
    dp.add_argument("--iters", type=int, default=500)
    dp.add_argument("--t0", type=float)
    dp.add_argument("--kappa", type=float, default=0.95)
    dp.add_argument("--step", type=float, help="step as a fraction of each search span")
    dp.add_argument("--slice", action="store_true", help="search the (d, H) plane through SBS and hot-spot")
    dp.add_argument("--d-range", type=float, nargs=2, default=(0.0, 1000.0))
    dp.add_argument("--h-range", type=float, nargs=2, default=(10.0, 1000.0))

    sw = sub.add_parser("sweep", parents=[common], help="sweep one variable")
    sw.add_argument("--variable", required=True, choices=SWEEP_VARIABLES)
    sw.add_argument("--range", type=float, nargs=3, required=True, metavar=("START", "STOP", "STEPS"))
    sw.add_argument("--mode", choices=SWEEP_MODES, default="deterministic")
    sw.add_argument("--metric", choices=("rate", "throughput", "coverage"))
    sw.add_argument("--cluster-size", type=int, default=4, help="users per channel for n_users sweeps")
    sw.add_argument("--trials", type=int, default=1000, help="Monte Carlo trials per point")
    sw.add_argument("--workers", type=int, default=1)

    va = sub.add_parser("validate", parents=[common], help="run the oracle suites")
    va.add_argument("--quick", action="store_true")
    return p


COMMANDS = {
    "ra": cmd_ra, "coverage": cmd_coverage, "cluster": cmd_cluster,
    "deploy": cmd_deploy, "sweep": cmd_sweep, "validate": cmd_validate,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = resolve_scenario(args.scenario, args.seed)
        return COMMANDS[args.command](args, sc, Path(args.out))
    except (UsageError, ScenarioError) as exc:
        print(f"ccrnoma {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
